#include "lfc/lenslet.hpp"

namespace lfc {

LightField demultiplex_lenslet(const Plane8& mosaic, int pitch_u, int pitch_v) {
  if (pitch_u < 1 || pitch_v < 1) throw InvalidArgument("demultiplex: pitch must be >= 1");
  if (mosaic.height % pitch_u != 0 || mosaic.width % pitch_v != 0) {
    throw InvalidArgument("demultiplex: mosaic dimensions not divisible by pitch");
  }
  const int vh = mosaic.height / pitch_u;
  const int vw = mosaic.width / pitch_v;
  LightField lf(pitch_u, pitch_v);
  for (int u = 0; u < pitch_u; ++u) {
    for (int v = 0; v < pitch_v; ++v) {
      View view(vw, vh);
      for (int y = 0; y < vh; ++y) {
        for (int x = 0; x < vw; ++x) {
          view.y.at(x, y) = mosaic.at(x * pitch_v + v, y * pitch_u + u);
        }
      }
      lf.at({u, v}) = std::move(view);
    }
  }
  return lf;
}

Plane8 multiplex_lenslet(const LightField& lf) {
  if (lf.view_count() == 0) throw InvalidArgument("multiplex: empty light field");
  const int vw = lf.views.front().width();
  const int vh = lf.views.front().height();
  Plane8 mosaic(vw * lf.grid_cols, vh * lf.grid_rows);
  for (int u = 0; u < lf.grid_rows; ++u) {
    for (int v = 0; v < lf.grid_cols; ++v) {
      const View& view = lf.at({u, v});
      if (view.width() != vw || view.height() != vh) {
        throw InvalidArgument("multiplex: views have mismatched dimensions");
      }
      for (int y = 0; y < vh; ++y) {
        for (int x = 0; x < vw; ++x) {
          mosaic.at(x * lf.grid_cols + v, y * lf.grid_rows + u) = view.y.at(x, y);
        }
      }
    }
  }
  return mosaic;
}

}  // namespace lfc
