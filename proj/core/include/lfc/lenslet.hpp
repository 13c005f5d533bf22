#pragma once

#include "lfc/image.hpp"

namespace lfc {

/// Split a microlens mosaic into its sub-aperture views. Pixel (x, y) of view
/// (u, v) is mosaic sample (x * pitch_v + v, y * pitch_u + u); the resulting
/// grid is pitch_u x pitch_v. Throws InvalidArgument when the mosaic
/// dimensions are not divisible by the pitch.
LightField demultiplex_lenslet(const Plane8& mosaic, int pitch_u, int pitch_v);

/// Inverse of demultiplex_lenslet: interleave the views back into a mosaic.
Plane8 multiplex_lenslet(const LightField& lf);

}  // namespace lfc
