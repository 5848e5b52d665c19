#pragma once

#include <cstddef>
#include <vector>

namespace mksgd {

/// Dense N x C x H x W buffer, row-major with n outermost.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

  double& at(int in, int ic, int iy, int ix) {
    return data[idx(in, ic, iy, ix)];
  }
  double at(int in, int ic, int iy, int ix) const {
    return data[idx(in, ic, iy, ix)];
  }

  size_t idx(int in, int ic, int iy, int ix) const {
    return ((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix;
  }

  int features() const { return c * h * w; }
  size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

}  // namespace mksgd
