#pragma once

#include <cstdint>
#include <vector>

#include "lfc/errors.hpp"

namespace lfc {

/// Angular grid coordinate of a sub-aperture view: u = row, v = column.
struct AngularPos {
  int u = 0;
  int v = 0;

  friend bool operator==(const AngularPos&, const AngularPos&) = default;
  friend auto operator<=>(const AngularPos&, const AngularPos&) = default;
};

/// Chebyshev distance between two angular positions.
inline int chebyshev(AngularPos a, AngularPos b) {
  int du = a.u > b.u ? a.u - b.u : b.u - a.u;
  int dv = a.v > b.v ? a.v - b.v : b.v - a.v;
  return du > dv ? du : dv;
}

/// 8-bit sample plane, row-major.
struct Plane8 {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  Plane8() = default;
  Plane8(int w, int h, uint8_t fill = 0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }

  friend bool operator==(const Plane8&, const Plane8&) = default;
};

/// Double-precision sample plane, row-major. Neural paths use values in [0,1].
struct PlaneF {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  PlaneF() = default;
  PlaneF(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }

  friend bool operator==(const PlaneF&, const PlaneF&) = default;
};

/// Interleaved 8-bit RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height, R G B per pixel

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0) {}

  const uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  uint8_t* pixel(int x, int y) {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
};

inline int ceil_div2(int v) { return (v + 1) / 2; }

/// One sub-aperture view in YCbCr 4:2:0, 8 bit. Chroma planes are
/// ceil(luma/2) in each dimension.
struct View {
  Plane8 y;
  Plane8 cb;
  Plane8 cr;

  View() = default;
  View(int w, int h, uint8_t luma = 0, uint8_t chroma = 128)
      : y(w, h, luma), cb(ceil_div2(w), ceil_div2(h), chroma),
        cr(ceil_div2(w), ceil_div2(h), chroma) {}

  int width() const { return y.width; }
  int height() const { return y.height; }

  void validate() const {
    if (cb.width != ceil_div2(y.width) || cb.height != ceil_div2(y.height) ||
        cr.width != cb.width || cr.height != cb.height) {
      throw InvalidArgument("view: chroma dims must be ceil(luma/2)");
    }
  }

  friend bool operator==(const View&, const View&) = default;
};

/// Dense grid of views indexed by angular position.
struct LightField {
  int grid_rows = 0;
  int grid_cols = 0;
  std::vector<View> views;  // row-major by (u, v)

  LightField() = default;
  LightField(int rows, int cols) : grid_rows(rows), grid_cols(cols), views(static_cast<size_t>(rows) * cols) {}

  bool contains(AngularPos p) const {
    return p.u >= 0 && p.u < grid_rows && p.v >= 0 && p.v < grid_cols;
  }
  const View& at(AngularPos p) const { return views[static_cast<size_t>(p.u) * grid_cols + p.v]; }
  View& at(AngularPos p) { return views[static_cast<size_t>(p.u) * grid_cols + p.v]; }
  int view_count() const { return grid_rows * grid_cols; }
};

/// Luma patch with samples scaled to [0,1].
struct Patch {
  int x0 = 0;
  int y0 = 0;
  PlaneF samples;

  int width() const { return samples.width; }
  int height() const { return samples.height; }
};

/// Scale an 8-bit plane to [0,1] doubles.
PlaneF to_unit(const Plane8& p);

/// Round a [0,1] plane back to 8 bit, clamping out-of-range values.
Plane8 to_plane8(const PlaneF& p);

/// Raster-order patch grid of `size`x`size` luma patches at the given stride.
/// The last row/column is anchored to the image border so that every pixel is
/// covered. Throws InvalidArgument when size exceeds the view dimensions.
std::vector<Patch> extract_patches(const View& view, int size, int stride);

/// Patch origins along one axis (exposed for tests and dataset tooling).
std::vector<int> patch_origins(int extent, int size, int stride);

}  // namespace lfc
