#pragma once

#include <vector>

#include "mksgd/parallel.hpp"
#include "mksgd/tensor.hpp"
#include "mksgd/types.hpp"

namespace mksgd {

/// Static geometry of one cross-correlation layer. Kernels are stored one
/// A x B matrix per (c, d) pair at index d * in_c + c.
struct ConvGeometry {
  int in_c = 1, out_c = 1;
  int kh = 3, kw = 3;
  int stride = 1, pad = 0;

  int out_h(int in_h) const { return (in_h + 2 * pad - kh) / stride + 1; }
  int out_w(int in_w) const { return (in_w + 2 * pad - kw) / stride + 1; }
};

// OpenMP kernels. Each output element is written by exactly one thread and
// inner sums run in a fixed order, so results are bitwise identical across
// policies and thread counts. The mksgd::ref versions are the serial
// reference the tests compare against.

void conv2d_forward(const Tensor4& x, const std::vector<Matrix>& kernels,
                    const std::vector<double>& bias, const ConvGeometry& g,
                    Tensor4& y, Exec exec);

void conv2d_grad_input(const Tensor4& dy, const std::vector<Matrix>& kernels,
                       const ConvGeometry& g, Tensor4& dx, Exec exec);

void conv2d_grad_params(const Tensor4& x, const Tensor4& dy,
                        const ConvGeometry& g, std::vector<Matrix>& dk,
                        std::vector<double>& db, Exec exec);

/// y[n,j] = bias[j] + sum_i x[n,i] * weight(i,j); x is consumed flattened.
void dense_forward(const Tensor4& x, const Matrix& weight,
                   const std::vector<double>& bias, Tensor4& y, Exec exec);

void dense_grad(const Tensor4& x, const Tensor4& dy, const Matrix& weight,
                Tensor4& dx, Matrix& dw, std::vector<double>& db, Exec exec);

namespace ref {

// Plain serial loops, kept as the ground truth for the parallel kernels.

void conv2d_forward(const Tensor4& x, const std::vector<Matrix>& kernels,
                    const std::vector<double>& bias, const ConvGeometry& g,
                    Tensor4& y);

void conv2d_grad_input(const Tensor4& dy, const std::vector<Matrix>& kernels,
                       const ConvGeometry& g, Tensor4& dx);

void conv2d_grad_params(const Tensor4& x, const Tensor4& dy,
                        const ConvGeometry& g, std::vector<Matrix>& dk,
                        std::vector<double>& db);

void dense_forward(const Tensor4& x, const Matrix& weight,
                   const std::vector<double>& bias, Tensor4& y);

void dense_grad(const Tensor4& x, const Tensor4& dy, const Matrix& weight,
                Tensor4& dx, Matrix& dw, std::vector<double>& db);

}  // namespace ref

}  // namespace mksgd
