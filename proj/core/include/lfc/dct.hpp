#pragma once

#include <array>

namespace lfc {

inline constexpr int kDctSize = 8;
using Block = std::array<double, kDctSize * kDctSize>;

/// Orthonormal 2D type-II DCT of an 8x8 block (row-major).
Block dct8x8_forward(const Block& spatial);

/// Exact inverse of dct8x8_forward.
Block dct8x8_inverse(const Block& freq);

}  // namespace lfc
