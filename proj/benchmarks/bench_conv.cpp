#include <benchmark/benchmark.h>

#include "lfc/nn/layers.hpp"

using namespace lfc::nn;

// The three layer shapes that dominate training and inference time.
static void BM_ConvForward(benchmark::State& state) {
  const int in_ch = static_cast<int>(state.range(0));
  const int out_ch = static_cast<int>(state.range(1));
  const int k = static_cast<int>(state.range(2));
  const int size = static_cast<int>(state.range(3));
  ConvLayer layer(in_ch, out_ch, k, Padding::kSame);
  Rng rng(3);
  layer.init_he_uniform(rng);
  Tensor4 x(1, in_ch, size, size);
  for (size_t i = 0; i < x.size(); ++i) x.v[i] = static_cast<double>(i % 97) / 97.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_forward(x, layer));
  }
  const double macs = static_cast<double>(size) * size * out_ch * in_ch * k * k;
  state.counters["GMAC/s"] =
      benchmark::Counter(macs * static_cast<double>(state.iterations()) / 1e9,
                         benchmark::Counter::kIsRate);
}
BENCHMARK(BM_ConvForward)->Args({18, 32, 7, 48})->Args({32, 64, 5, 44})->Args({288, 32, 3, 48});

static void BM_ConvBackward(benchmark::State& state) {
  ConvLayer layer(32, 64, 5, Padding::kSame);
  Rng rng(4);
  layer.init_he_uniform(rng);
  Tensor4 x(1, 32, 44, 44);
  for (size_t i = 0; i < x.size(); ++i) x.v[i] = static_cast<double>(i % 89) / 89.0;
  ConvCache cache;
  Tensor4 out = conv2d_forward(x, layer, &cache);
  Tensor4 grad(out.n, out.c, out.h, out.w, 1e-3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_backward(grad, layer, cache));
  }
}
BENCHMARK(BM_ConvBackward);
