#include "lfc/color.hpp"

#include <algorithm>
#include <cmath>

namespace lfc {

namespace {

uint8_t clamp8(double v) {
  return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

View rgb_to_ycbcr420(const RgbImage& rgb) {
  const int w = rgb.width;
  const int h = rgb.height;
  View out(w, h);

  // Full-resolution chroma first, then 2x2 box average.
  PlaneF cb_full(w, h);
  PlaneF cr_full(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const uint8_t* px = rgb.pixel(x, y);
      const double r = px[0], g = px[1], b = px[2];
      const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
      out.y.at(x, y) = clamp8(luma);
      cb_full.at(x, y) = 128.0 + (b - luma) / 1.772;
      cr_full.at(x, y) = 128.0 + (r - luma) / 1.402;
    }
  }
  for (int cy = 0; cy < out.cb.height; ++cy) {
    for (int cx = 0; cx < out.cb.width; ++cx) {
      double sum_cb = 0.0, sum_cr = 0.0;
      int count = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int x = 2 * cx + dx;
          const int y = 2 * cy + dy;
          if (x < w && y < h) {
            sum_cb += cb_full.at(x, y);
            sum_cr += cr_full.at(x, y);
            ++count;
          }
        }
      }
      out.cb.at(cx, cy) = clamp8(sum_cb / count);
      out.cr.at(cx, cy) = clamp8(sum_cr / count);
    }
  }
  return out;
}

RgbImage ycbcr420_to_rgb(const View& view) {
  view.validate();
  RgbImage out(view.width(), view.height());
  for (int y = 0; y < view.height(); ++y) {
    for (int x = 0; x < view.width(); ++x) {
      const double luma = view.y.at(x, y);
      const double cb = view.cb.at(x / 2, y / 2) - 128.0;
      const double cr = view.cr.at(x / 2, y / 2) - 128.0;
      uint8_t* px = out.pixel(x, y);
      px[0] = clamp8(luma + 1.402 * cr);
      px[1] = clamp8(luma - 0.344136 * cb - 0.714136 * cr);
      px[2] = clamp8(luma + 1.772 * cb);
    }
  }
  return out;
}

}  // namespace lfc
