#include "mksgd/conv_ops.hpp"

// Naive single-threaded loops with the same accumulation order as the
// OpenMP kernels; the tests require bitwise agreement.

namespace mksgd::ref {

void conv2d_forward(const Tensor4& x, const std::vector<Matrix>& kernels,
                    const std::vector<double>& bias, const ConvGeometry& g,
                    Tensor4& y) {
  const int oh = g.out_h(x.h), ow = g.out_w(x.w);
  y = Tensor4(x.n, g.out_c, oh, ow);
  for (int n = 0; n < x.n; ++n)
    for (int d = 0; d < g.out_c; ++d)
      for (int iy = 0; iy < oh; ++iy)
        for (int ix = 0; ix < ow; ++ix) {
          double acc = bias[d];
          for (int c = 0; c < g.in_c; ++c) {
            const Matrix& k = kernels[static_cast<size_t>(d) * g.in_c + c];
            for (int a = 0; a < g.kh; ++a)
              for (int b = 0; b < g.kw; ++b) {
                const int sy = iy * g.stride - g.pad + a;
                const int sx = ix * g.stride - g.pad + b;
                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                acc += k(a, b) * x.at(n, c, sy, sx);
              }
          }
          y.at(n, d, iy, ix) = acc;
        }
}

void conv2d_grad_input(const Tensor4& dy, const std::vector<Matrix>& kernels,
                       const ConvGeometry& g, Tensor4& dx) {
  dx.zero();
  for (int n = 0; n < dx.n; ++n)
    for (int d = 0; d < g.out_c; ++d)
      for (int iy = 0; iy < dy.h; ++iy)
        for (int ix = 0; ix < dy.w; ++ix) {
          const double gval = dy.at(n, d, iy, ix);
          for (int c = 0; c < g.in_c; ++c) {
            const Matrix& k = kernels[static_cast<size_t>(d) * g.in_c + c];
            for (int a = 0; a < g.kh; ++a)
              for (int b = 0; b < g.kw; ++b) {
                const int sy = iy * g.stride - g.pad + a;
                const int sx = ix * g.stride - g.pad + b;
                if (sy < 0 || sy >= dx.h || sx < 0 || sx >= dx.w) continue;
                dx.at(n, c, sy, sx) += gval * k(a, b);
              }
          }
        }
}

void conv2d_grad_params(const Tensor4& x, const Tensor4& dy,
                        const ConvGeometry& g, std::vector<Matrix>& dk,
                        std::vector<double>& db) {
  dk.assign(static_cast<size_t>(g.out_c) * g.in_c, Matrix::Zero(g.kh, g.kw));
  db.assign(static_cast<size_t>(g.out_c), 0.0);
  for (int d = 0; d < g.out_c; ++d)
    for (int c = 0; c < g.in_c; ++c) {
      Matrix& grad = dk[static_cast<size_t>(d) * g.in_c + c];
      for (int n = 0; n < x.n; ++n)
        for (int iy = 0; iy < dy.h; ++iy)
          for (int ix = 0; ix < dy.w; ++ix) {
            const double gval = dy.at(n, d, iy, ix);
            for (int a = 0; a < g.kh; ++a)
              for (int b = 0; b < g.kw; ++b) {
                const int sy = iy * g.stride - g.pad + a;
                const int sx = ix * g.stride - g.pad + b;
                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                grad(a, b) += gval * x.at(n, c, sy, sx);
              }
          }
    }
  for (int d = 0; d < g.out_c; ++d)
    for (int n = 0; n < dy.n; ++n)
      for (int iy = 0; iy < dy.h; ++iy)
        for (int ix = 0; ix < dy.w; ++ix) db[d] += dy.at(n, d, iy, ix);
}

void dense_forward(const Tensor4& x, const Matrix& weight,
                   const std::vector<double>& bias, Tensor4& y) {
  const int in_dim = x.features();
  const int out_dim = static_cast<int>(weight.cols());
  y = Tensor4(x.n, out_dim, 1, 1);
  for (int n = 0; n < x.n; ++n)
    for (int j = 0; j < out_dim; ++j) {
      double acc = bias[j];
      for (int i = 0; i < in_dim; ++i) {
        acc += x.data[static_cast<size_t>(n) * in_dim + i] * weight(i, j);
      }
      y.at(n, j, 0, 0) = acc;
    }
}

void dense_grad(const Tensor4& x, const Tensor4& dy, const Matrix& weight,
                Tensor4& dx, Matrix& dw, std::vector<double>& db) {
  const int in_dim = x.features();
  const int out_dim = static_cast<int>(weight.cols());
  dw = Matrix::Zero(in_dim, out_dim);
  db.assign(static_cast<size_t>(out_dim), 0.0);
  for (int n = 0; n < x.n; ++n)
    for (int i = 0; i < in_dim; ++i) {
      double acc = 0.0;
      for (int j = 0; j < out_dim; ++j) acc += dy.at(n, j, 0, 0) * weight(i, j);
      dx.data[static_cast<size_t>(n) * in_dim + i] = acc;
    }
  for (int i = 0; i < in_dim; ++i)
    for (int j = 0; j < out_dim; ++j) {
      double acc = 0.0;
      for (int n = 0; n < x.n; ++n) {
        acc += x.data[static_cast<size_t>(n) * in_dim + i] * dy.at(n, j, 0, 0);
      }
      dw(i, j) = acc;
    }
  for (int j = 0; j < out_dim; ++j)
    for (int n = 0; n < dy.n; ++n) db[j] += dy.at(n, j, 0, 0);
}

}  // namespace mksgd::ref
