#pragma once

#include <cstdint>

#include "lfc/image.hpp"

namespace lfc {

/// Test scenes with known geometry. Views satisfy
/// V_p(x, y) = T(x - p.v * d, y - p.u * d) for each textured layer at
/// disparity d, so warping any view toward another with the true disparity
/// reproduces it exactly away from occlusions and borders.
struct SyntheticConfig {
  int grid_rows = 8;
  int grid_cols = 8;
  int view_width = 48;
  int view_height = 48;
  double disparity = 1.0;      // background layer
  double fg_disparity = 2.5;   // foreground layer (occlusion scene only)
  bool occluder = false;       // add a foreground rectangle
  uint64_t seed = 7;
};

/// Band-limited value-noise texture sampled continuously.
class NoiseTexture {
public:
  NoiseTexture(uint64_t seed, double cell_size, double contrast = 0.8);

  /// Sample in [0,1]; smooth in both arguments.
  double sample(double x, double y) const;

private:
  double lattice(long ix, long iy) const;

  uint64_t seed_;
  double cell_;
  double contrast_;
};

/// Generate a synthetic light field (luma texture, neutral chroma).
LightField generate_synthetic_lf(const SyntheticConfig& config);

/// A single natural-statistics test image (multi-octave value noise).
Plane8 generate_test_image(int width, int height, uint64_t seed);

}  // namespace lfc
