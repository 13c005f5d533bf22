#include <benchmark/benchmark.h>

#include "lfc/synthesis.hpp"
#include "lfc/synthetic.hpp"

static void BM_WarpView(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const lfc::NoiseTexture tex(5, 6.0);
  lfc::PlaneF ref(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) ref.at(x, y) = tex.sample(x, y);
  }
  lfc::PlaneF d(size, size, 1.37);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lfc::warp_view(ref, {0, 0}, {2, 3}, d));
  }
}
BENCHMARK(BM_WarpView)->Arg(48)->Arg(256);

static void BM_BuildFeatures(benchmark::State& state) {
  lfc::D2GanConfig cfg;
  const auto corners = lfc::quadrant_corners(8, 8, {1, 1});
  const lfc::NoiseTexture tex(6, 6.0);
  std::array<lfc::PlaneF, 4> refs;
  for (size_t i = 0; i < 4; ++i) {
    refs[i] = lfc::PlaneF(60, 60);
    for (int y = 0; y < 60; ++y) {
      for (int x = 0; x < 60; ++x) refs[i].at(x, y) = tex.sample(x + 60.0 * i, y);
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(lfc::build_features(refs, corners, {1, 1}, cfg, 8, 8));
  }
}
BENCHMARK(BM_BuildFeatures);
