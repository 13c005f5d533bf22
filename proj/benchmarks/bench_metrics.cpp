#include <benchmark/benchmark.h>

#include "lfc/metrics.hpp"
#include "lfc/synthetic.hpp"

static void BM_Psnr(benchmark::State& state) {
  const lfc::Plane8 a = lfc::generate_test_image(512, 512, 9);
  const lfc::Plane8 b = lfc::generate_test_image(512, 512, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lfc::psnr(a, b));
  }
}
BENCHMARK(BM_Psnr);

static void BM_Ssim(benchmark::State& state) {
  const lfc::Plane8 a = lfc::generate_test_image(512, 512, 11);
  const lfc::Plane8 b = lfc::generate_test_image(512, 512, 12);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lfc::ssim(a, b));
  }
}
BENCHMARK(BM_Ssim);
