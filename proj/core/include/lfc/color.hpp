#pragma once

#include "lfc/image.hpp"

namespace lfc {

/// BT.601 full-range RGB -> YCbCr with 2x2 box-averaged chroma subsampling.
View rgb_to_ycbcr420(const RgbImage& rgb);

/// Inverse conversion; chroma upsampled by sample replication, output
/// clamped to [0,255].
RgbImage ycbcr420_to_rgb(const View& view);

}  // namespace lfc
