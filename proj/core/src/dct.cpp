#include "lfc/dct.hpp"

#include <cmath>

namespace lfc {

namespace {

struct Basis {
  // cosines[k][n] = c(k) * cos((2n+1) k pi / 16)
  double cosines[kDctSize][kDctSize];
  Basis() {
    const double pi = std::acos(-1.0);
    for (int k = 0; k < kDctSize; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / kDctSize) : std::sqrt(2.0 / kDctSize);
      for (int n = 0; n < kDctSize; ++n) {
        cosines[k][n] = scale * std::cos((2 * n + 1) * k * pi / (2 * kDctSize));
      }
    }
  }
};

const Basis& basis() {
  static const Basis b;
  return b;
}

}  // namespace

Block dct8x8_forward(const Block& spatial) {
  const Basis& b = basis();
  Block rows{};
  for (int y = 0; y < kDctSize; ++y) {
    for (int k = 0; k < kDctSize; ++k) {
      double acc = 0.0;
      for (int x = 0; x < kDctSize; ++x) acc += spatial[y * kDctSize + x] * b.cosines[k][x];
      rows[y * kDctSize + k] = acc;
    }
  }
  Block out{};
  for (int k = 0; k < kDctSize; ++k) {
    for (int x = 0; x < kDctSize; ++x) {
      double acc = 0.0;
      for (int y = 0; y < kDctSize; ++y) acc += rows[y * kDctSize + x] * b.cosines[k][y];
      out[k * kDctSize + x] = acc;
    }
  }
  return out;
}

Block dct8x8_inverse(const Block& freq) {
  const Basis& b = basis();
  Block cols{};
  for (int y = 0; y < kDctSize; ++y) {
    for (int x = 0; x < kDctSize; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kDctSize; ++k) acc += freq[k * kDctSize + x] * b.cosines[k][y];
      cols[y * kDctSize + x] = acc;
    }
  }
  Block out{};
  for (int y = 0; y < kDctSize; ++y) {
    for (int x = 0; x < kDctSize; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kDctSize; ++k) acc += cols[y * kDctSize + k] * b.cosines[k][x];
      out[y * kDctSize + x] = acc;
    }
  }
  return out;
}

}  // namespace lfc
