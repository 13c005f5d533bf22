#include <benchmark/benchmark.h>

#include <random>

#include "lfc/dct.hpp"

static void BM_Dct8x8Forward(benchmark::State& state) {
  std::mt19937 rng(1);
  lfc::Block block{};
  for (double& v : block) v = static_cast<double>(rng() % 512) - 256.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lfc::dct8x8_forward(block));
  }
}
BENCHMARK(BM_Dct8x8Forward);

static void BM_Dct8x8RoundTrip(benchmark::State& state) {
  std::mt19937 rng(2);
  lfc::Block block{};
  for (double& v : block) v = static_cast<double>(rng() % 512) - 256.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lfc::dct8x8_inverse(lfc::dct8x8_forward(block)));
  }
}
BENCHMARK(BM_Dct8x8RoundTrip);
