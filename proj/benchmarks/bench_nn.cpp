#include <benchmark/benchmark.h>

#include <random>

#include "semsplat/nn.hpp"

using namespace semsplat;

namespace {

nn::FeatureMap random_features(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  nn::FeatureMap f(h, w, c);
  for (Eigen::Index i = 0; i < f.data.size(); ++i) f.data.data()[i] = n(rng);
  return f;
}

// Args: input channels, output channels, on a 64x48 map.
void BM_Conv3x3Forward(benchmark::State& state) {
  const int in = static_cast<int>(state.range(0)), out = static_cast<int>(state.range(1));
  const nn::Conv3x3 conv("c", in, out);
  const nn::FeatureMap x = random_features(48, 64, in, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
}
BENCHMARK(BM_Conv3x3Forward)->Args({384, 256})->Args({256, 128})->Args({32, 32})->Unit(benchmark::kMillisecond);

void BM_Conv3x3Backward(benchmark::State& state) {
  const int in = static_cast<int>(state.range(0)), out = static_cast<int>(state.range(1));
  nn::Conv3x3 conv("c", in, out);
  const nn::FeatureMap x = random_features(48, 64, in, 3);
  const nn::FeatureMap dy = random_features(48, 64, out, 4);
  conv.weight.zero_grad();
  conv.bias.zero_grad();
  for (auto _ : state) benchmark::DoNotOptimize(conv.backward(x, dy));
}
BENCHMARK(BM_Conv3x3Backward)->Args({384, 256})->Args({32, 32})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
