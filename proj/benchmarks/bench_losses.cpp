#include <benchmark/benchmark.h>

#include <random>

#include "semsplat/losses.hpp"

using namespace semsplat;

namespace {

ImageD noise_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageD img(h, w, 3);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = u(rng);
  return img;
}

void BM_Ssim(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const ImageD a = noise_image(w * 3 / 4, w, 1), b = noise_image(w * 3 / 4, w, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
  state.SetItemsProcessed(state.iterations() * a.pixels());
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(320);

void BM_SsimWithGradient(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const ImageD a = noise_image(w * 3 / 4, w, 1), b = noise_image(w * 3 / 4, w, 2);
  ImageD grad;
  for (auto _ : state) benchmark::DoNotOptimize(ssim_weighted(a, b, nullptr, &grad));
  state.SetItemsProcessed(state.iterations() * a.pixels());
}
BENCHMARK(BM_SsimWithGradient)->Arg(64)->Arg(320);

}  // namespace

BENCHMARK_MAIN();
