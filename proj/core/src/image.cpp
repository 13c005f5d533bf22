#include "lfc/image.hpp"

#include <algorithm>
#include <cmath>

namespace lfc {

PlaneF to_unit(const Plane8& p) {
  PlaneF out(p.width, p.height);
  for (size_t i = 0; i < p.data.size(); ++i) out.data[i] = p.data[i] / 255.0;
  return out;
}

Plane8 to_plane8(const PlaneF& p) {
  Plane8 out(p.width, p.height);
  for (size_t i = 0; i < p.data.size(); ++i) {
    double v = std::clamp(p.data[i], 0.0, 1.0) * 255.0;
    out.data[i] = static_cast<uint8_t>(std::lround(v));
  }
  return out;
}

std::vector<int> patch_origins(int extent, int size, int stride) {
  std::vector<int> origins;
  for (int o = 0; o + size < extent; o += stride) origins.push_back(o);
  if (origins.empty() || origins.back() != extent - size) {
    origins.push_back(extent - size);  // border-anchored final patch
  }
  return origins;
}

std::vector<Patch> extract_patches(const View& view, int size, int stride) {
  if (size <= 0 || stride <= 0) throw InvalidArgument("extract_patches: size and stride must be positive");
  if (size > view.width() || size > view.height()) {
    throw InvalidArgument("extract_patches: patch size exceeds view dimensions");
  }
  const std::vector<int> xs = patch_origins(view.width(), size, stride);
  const std::vector<int> ys = patch_origins(view.height(), size, stride);
  std::vector<Patch> patches;
  patches.reserve(xs.size() * ys.size());
  for (int oy : ys) {
    for (int ox : xs) {
      Patch p;
      p.x0 = ox;
      p.y0 = oy;
      p.samples = PlaneF(size, size);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          p.samples.at(x, y) = view.y.at(ox + x, oy + y) / 255.0;
        }
      }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

}  // namespace lfc
