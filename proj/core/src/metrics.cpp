#include "lfc/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace lfc {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::array<double, kSsimWindow> gaussian_kernel() {
  std::array<double, kSsimWindow> k{};
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[static_cast<size_t>(i)];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-region Gaussian filter.
PlaneF gauss_filter_valid(const PlaneF& img) {
  static const auto kernel = gaussian_kernel();
  const int half = kSsimWindow / 2;
  PlaneF rows(img.width - 2 * half, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < rows.width; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += kernel[static_cast<size_t>(i)] * img.at(x + i, y);
      rows.at(x, y) = acc;
    }
  }
  PlaneF out(rows.width, img.height - 2 * half);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += kernel[static_cast<size_t>(i)] * rows.at(x, y + i);
      out.at(x, y) = acc;
    }
  }
  return out;
}

PlaneF multiply(const PlaneF& a, const PlaneF& b) {
  PlaneF out(a.width, a.height);
  for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

// Least-squares cubic fit with centered abscissa for conditioning.
struct Cubic {
  double center = 0.0;
  std::array<double, 4> coeff{};  // c0 + c1 t + c2 t^2 + c3 t^3, t = x - center

  double integral(double x0, double x1) const {
    auto antiderivative = [&](double x) {
      const double t = x - center;
      return coeff[0] * t + coeff[1] * t * t / 2 + coeff[2] * t * t * t / 3 +
             coeff[3] * t * t * t * t / 4;
    };
    return antiderivative(x1) - antiderivative(x0);
  }
};

Cubic fit_cubic(const std::vector<double>& xs, const std::vector<double>& ys) {
  const size_t n = xs.size();
  Cubic fit;
  for (double x : xs) fit.center += x;
  fit.center /= static_cast<double>(n);

  // Normal equations A c = b for the centered Vandermonde system.
  double sx[7] = {0};
  double b[4] = {0};
  for (size_t i = 0; i < n; ++i) {
    const double t = xs[i] - fit.center;
    double p = 1.0;
    for (int k = 0; k < 7; ++k) {
      sx[k] += p;
      p *= t;
    }
    p = 1.0;
    for (int k = 0; k < 4; ++k) {
      b[k] += ys[i] * p;
      p *= t;
    }
  }
  double a[4][5];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a[r][c] = sx[r + c];
    a[r][4] = b[r];
  }
  for (int col = 0; col < 4; ++col) {  // Gaussian elimination, partial pivot
    int pivot = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    if (std::abs(a[col][col]) < 1e-14) throw InvalidArgument("degenerate curve fit");
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
    }
  }
  for (int k = 0; k < 4; ++k) fit.coeff[static_cast<size_t>(k)] = a[k][4] / a[k][k];
  return fit;
}

// Average vertical gap between two fitted curves over the overlap of their
// abscissa ranges.
double average_fit_difference(const std::vector<double>& x_anchor, const std::vector<double>& y_anchor,
                              const std::vector<double>& x_test, const std::vector<double>& y_test) {
  const double lo = std::max(*std::min_element(x_anchor.begin(), x_anchor.end()),
                             *std::min_element(x_test.begin(), x_test.end()));
  const double hi = std::min(*std::max_element(x_anchor.begin(), x_anchor.end()),
                             *std::max_element(x_test.begin(), x_test.end()));
  if (!(hi > lo)) throw InvalidArgument("curves do not overlap");
  const Cubic fa = fit_cubic(x_anchor, y_anchor);
  const Cubic ft = fit_cubic(x_test, y_test);
  return (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
}

}  // namespace

double mse(const Plane8& a, const Plane8& b) {
  if (a.width != b.width || a.height != b.height) throw InvalidArgument("mse: dimension mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse_value);
}

double psnr(const Plane8& a, const Plane8& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Plane8& a, const Plane8& b) {
  if (a.width != b.width || a.height != b.height) throw InvalidArgument("ssim: dimension mismatch");
  if (a.width < kSsimWindow || a.height < kSsimWindow) {
    throw InvalidArgument("ssim: planes smaller than the 11x11 window");
  }
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

  PlaneF fa(a.width, a.height), fb(b.width, b.height);
  for (size_t i = 0; i < a.data.size(); ++i) {
    fa.data[i] = a.data[i];
    fb.data[i] = b.data[i];
  }
  const PlaneF mu_a = gauss_filter_valid(fa);
  const PlaneF mu_b = gauss_filter_valid(fb);
  const PlaneF aa = gauss_filter_valid(multiply(fa, fa));
  const PlaneF bb = gauss_filter_valid(multiply(fb, fb));
  const PlaneF ab = gauss_filter_valid(multiply(fa, fb));

  double total = 0.0;
  for (size_t i = 0; i < mu_a.data.size(); ++i) {
    const double ma = mu_a.data[i];
    const double mb = mu_b.data[i];
    const double va = aa.data[i] - ma * ma;
    const double vb = bb.data[i] - mb * mb;
    const double cov = ab.data[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.data.size());
}

void RdCurve::validate() const {
  if (points.size() < 4) throw InvalidArgument("rd curve needs at least 4 points");
  for (size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].rate_bpp > points[i - 1].rate_bpp)) {
      throw InvalidArgument("rd curve rates must be strictly increasing");
    }
    if (!(points[i].rate_bpp > 0) || !(points[0].rate_bpp > 0)) {
      throw InvalidArgument("rd curve rates must be positive");
    }
  }
}

bool RdCurve::quality_monotone() const {
  for (size_t i = 1; i < points.size(); ++i) {
    if (points[i].quality < points[i - 1].quality) return false;
  }
  return true;
}

double bd_rate(const RdCurve& anchor, const RdCurve& test) {
  anchor.validate();
  test.validate();
  std::vector<double> qa, ra, qt, rt;
  for (const RdSample& p : anchor.points) {
    qa.push_back(p.quality);
    ra.push_back(std::log10(p.rate_bpp));
  }
  for (const RdSample& p : test.points) {
    qt.push_back(p.quality);
    rt.push_back(std::log10(p.rate_bpp));
  }
  const double delta_log_rate = average_fit_difference(qa, ra, qt, rt);
  return 100.0 * (std::pow(10.0, delta_log_rate) - 1.0);
}

double bd_quality(const RdCurve& anchor, const RdCurve& test) {
  anchor.validate();
  test.validate();
  std::vector<double> qa, ra, qt, rt;
  for (const RdSample& p : anchor.points) {
    qa.push_back(p.quality);
    ra.push_back(std::log10(p.rate_bpp));
  }
  for (const RdSample& p : test.points) {
    qt.push_back(p.quality);
    rt.push_back(std::log10(p.rate_bpp));
  }
  return average_fit_difference(ra, qa, rt, qt);
}

FluctuationStats fluctuation(const LightField& decoded, const LightField& original,
                             const PseudoVideoSequence& seq) {
  if (decoded.grid_rows != original.grid_rows || decoded.grid_cols != original.grid_cols ||
      decoded.grid_rows != seq.grid_rows || decoded.grid_cols != seq.grid_cols) {
    throw InvalidArgument("fluctuation: grid mismatch");
  }
  FluctuationStats stats;
  for (const SequenceEntry& e : seq.entries) {
    stats.psnr_per_view.push_back(psnr(decoded.at(e.pos).y, original.at(e.pos).y));
  }
  std::vector<double> finite;
  for (double v : stats.psnr_per_view) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.empty()) {
    stats.all_lossless = true;
    stats.mean = std::numeric_limits<double>::infinity();
    stats.min = std::numeric_limits<double>::infinity();
    stats.stddev = 0.0;
    return stats;
  }
  double sum = 0.0;
  for (double v : finite) sum += v;
  stats.mean = sum / static_cast<double>(finite.size());
  double var = 0.0;
  for (double v : finite) var += (v - stats.mean) * (v - stats.mean);
  stats.stddev = std::sqrt(var / static_cast<double>(finite.size()));
  stats.min = *std::min_element(finite.begin(), finite.end());
  return stats;
}

}  // namespace lfc
