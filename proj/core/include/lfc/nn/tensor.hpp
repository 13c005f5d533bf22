#pragma once

#include <cstddef>
#include <vector>

#include "lfc/errors.hpp"
#include "lfc/image.hpp"

namespace lfc::nn {

/// Dense (batch, channels, height, width) tensor of doubles, row-major with
/// width fastest.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
    if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0) throw InvalidArgument("tensor dims must be positive");
  }

  size_t size() const { return v.size(); }
  size_t plane_size() const { return static_cast<size_t>(h) * w; }

  double* plane(int in, int ic) {
    return v.data() + ((static_cast<size_t>(in) * c + ic) * h) * w;
  }
  const double* plane(int in, int ic) const {
    return v.data() + ((static_cast<size_t>(in) * c + ic) * h) * w;
  }

  double at(int in, int ic, int iy, int ix) const { return plane(in, ic)[static_cast<size_t>(iy) * w + ix]; }
  double& at(int in, int ic, int iy, int ix) { return plane(in, ic)[static_cast<size_t>(iy) * w + ix]; }

  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  static Tensor4 from_plane(const PlaneF& p) {
    Tensor4 t(1, 1, p.height, p.width);
    t.v = p.data;
    return t;
  }
  PlaneF to_plane(int in = 0, int ic = 0) const {
    PlaneF p(w, h);
    const double* src = plane(in, ic);
    p.data.assign(src, src + plane_size());
    return p;
  }
};

/// Trainable tensor with its gradient accumulator.
struct Param {
  Tensor4 value;
  Tensor4 grad;

  Param() = default;
  explicit Param(Tensor4 init) : value(std::move(init)), grad(value.n, value.c, value.h, value.w) {}

  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

}  // namespace lfc::nn
