#include <benchmark/benchmark.h>

#include "lfc/codec.hpp"
#include "lfc/synthetic.hpp"

static void BM_EncodeIntra512(benchmark::State& state) {
  const lfc::Plane8 img = lfc::generate_test_image(512, 512, 7);
  lfc::View v(512, 512);
  v.y = img;
  const int qp = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(lfc::encode_view(v, {}, qp));
  }
}
BENCHMARK(BM_EncodeIntra512)->Arg(18)->Arg(34);

static void BM_EncodeInter(benchmark::State& state) {
  const lfc::Plane8 img = lfc::generate_test_image(96, 96, 8);
  lfc::View cur(64, 64), ref(64, 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      cur.y.at(x, y) = img.at(x + 3, y + 2);
      ref.y.at(x, y) = img.at(x, y);
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(lfc::encode_view(cur, {&ref}, 28));
  }
}
BENCHMARK(BM_EncodeInter);
