#include "lfc/synthetic.hpp"

#include <cmath>

namespace lfc {

namespace {

uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double smootherstep(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

}  // namespace

NoiseTexture::NoiseTexture(uint64_t seed, double cell_size, double contrast)
    : seed_(seed), cell_(cell_size), contrast_(contrast) {}

double NoiseTexture::lattice(long ix, long iy) const {
  const uint64_t h = mix(seed_ ^ mix(static_cast<uint64_t>(ix) * 0x100000001b3ULL ^
                                     mix(static_cast<uint64_t>(iy))));
  return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
}

double NoiseTexture::sample(double x, double y) const {
  const double gx = x / cell_;
  const double gy = y / cell_;
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const long ix = static_cast<long>(fx);
  const long iy = static_cast<long>(fy);
  const double tx = smootherstep(gx - fx);
  const double ty = smootherstep(gy - fy);
  const double v00 = lattice(ix, iy);
  const double v10 = lattice(ix + 1, iy);
  const double v01 = lattice(ix, iy + 1);
  const double v11 = lattice(ix + 1, iy + 1);
  const double top = v00 + tx * (v10 - v00);
  const double bot = v01 + tx * (v11 - v01);
  const double v = top + ty * (bot - top);
  return 0.5 + contrast_ * (v - 0.5);
}

LightField generate_synthetic_lf(const SyntheticConfig& config) {
  if (config.grid_rows < 1 || config.grid_cols < 1 || config.view_width < 1 ||
      config.view_height < 1) {
    throw InvalidArgument("synthetic config dimensions must be positive");
  }
  const NoiseTexture bg_coarse(config.seed, 9.0, 0.9);
  const NoiseTexture bg_fine(config.seed + 101, 3.5, 0.5);
  const NoiseTexture fg_tex(config.seed + 202, 5.0, 0.9);

  // Foreground rectangle in scene coordinates, sized relative to the view.
  const double fg_x0 = config.view_width * 0.55;
  const double fg_x1 = config.view_width * 0.85;
  const double fg_y0 = config.view_height * 0.25;
  const double fg_y1 = config.view_height * 0.6;

  LightField lf(config.grid_rows, config.grid_cols);
  for (int u = 0; u < config.grid_rows; ++u) {
    for (int v = 0; v < config.grid_cols; ++v) {
      View view(config.view_width, config.view_height);
      for (int y = 0; y < config.view_height; ++y) {
        for (int x = 0; x < config.view_width; ++x) {
          double value;
          bool fg = false;
          if (config.occluder) {
            const double sx = x - v * config.fg_disparity;
            const double sy = y - u * config.fg_disparity;
            if (sx >= fg_x0 && sx < fg_x1 && sy >= fg_y0 && sy < fg_y1) {
              value = fg_tex.sample(sx, sy);
              fg = true;
            }
          }
          if (!fg) {
            const double sx = x - v * config.disparity;
            const double sy = y - u * config.disparity;
            value = 0.65 * bg_coarse.sample(sx, sy) + 0.35 * bg_fine.sample(sx, sy);
          }
          const double clamped = std::clamp(value, 0.0, 1.0);
          view.y.at(x, y) = static_cast<uint8_t>(std::lround(clamped * 255.0));
        }
      }
      lf.at({u, v}) = std::move(view);
    }
  }
  return lf;
}

Plane8 generate_test_image(int width, int height, uint64_t seed) {
  const NoiseTexture coarse(seed, 37.0, 1.0);
  const NoiseTexture mid(seed + 13, 11.0, 0.8);
  const NoiseTexture fine(seed + 29, 4.0, 0.5);
  Plane8 img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = 0.5 * coarse.sample(x, y) + 0.33 * mid.sample(x, y) + 0.17 * fine.sample(x, y);
      img.at(x, y) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  return img;
}

}  // namespace lfc
