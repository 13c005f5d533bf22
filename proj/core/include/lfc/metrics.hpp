#pragma once

#include <vector>

#include "lfc/coding_structure.hpp"
#include "lfc/image.hpp"

namespace lfc {

/// Mean squared error between two 8-bit planes.
double mse(const Plane8& a, const Plane8& b);

/// 10*log10(255^2 / MSE); +infinity when the planes are identical.
double psnr(const Plane8& a, const Plane8& b);
double psnr_from_mse(double mse_value);

/// Single-scale SSIM on luma: 11x11 Gaussian window (sigma 1.5),
/// C1 = (0.01*255)^2, C2 = (0.03*255)^2, averaged over the valid region.
/// Requires planes of at least 11x11.
double ssim(const Plane8& a, const Plane8& b);

/// One operating point of a rate/quality curve. Quality is PSNR in dB or an
/// SSIM score, depending on the curve being compared.
struct RdSample {
  double rate_bpp = 0.0;
  double quality = 0.0;
};

/// Rate/quality curve; points must be strictly increasing in rate, and
/// should be non-decreasing in quality (warned, not enforced).
struct RdCurve {
  std::vector<RdSample> points;

  void validate() const;  // >= 4 points, strictly increasing rate
  bool quality_monotone() const;
};

/// Bjontegaard delta rate of `test` against `anchor`, in percent (negative
/// means the test curve needs less rate at equal quality). Cubic fit of
/// log10(rate) over quality, averaged across the overlapping quality range by
/// exact polynomial integration.
double bd_rate(const RdCurve& anchor, const RdCurve& test);

/// Bjontegaard delta quality at equal rate (dB for PSNR curves, score units
/// otherwise): cubic fit of quality over log10(rate), averaged across the
/// overlapping log-rate range.
double bd_quality(const RdCurve& anchor, const RdCurve& test);

struct FluctuationStats {
  std::vector<double> psnr_per_view;  // POC order, +inf for lossless views
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  bool all_lossless = false;
};

/// Per-view luma PSNR of a reconstructed light field against the original,
/// in POC order, with summary statistics over the finite entries.
FluctuationStats fluctuation(const LightField& decoded, const LightField& original,
                             const PseudoVideoSequence& seq);

}  // namespace lfc
