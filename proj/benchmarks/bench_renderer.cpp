#include <benchmark/benchmark.h>

#include "scene.hpp"
#include "semsplat/renderer.hpp"

using namespace semsplat;

namespace {

// Args: image width (height is 3/4 of it), Gaussian count.
void BM_RenderForward(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const CameraIntrinsics intr = CameraIntrinsics::desk(w, w * 3 / 4);
  const GaussianMap map = bench::random_scene(static_cast<int>(state.range(1)), intr);
  for (auto _ : state) benchmark::DoNotOptimize(render(map, Pose::identity(), intr));
  state.SetItemsProcessed(state.iterations() * intr.width * intr.height);
}
BENCHMARK(BM_RenderForward)->Args({64, 1000})->Args({64, 5000})->Args({160, 5000})->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const CameraIntrinsics intr = CameraIntrinsics::desk(w, w * 3 / 4);
  const GaussianMap map = bench::random_scene(static_cast<int>(state.range(1)), intr);
  const RenderOutput fwd = render(map, Pose::identity(), intr);
  ChannelGradients up = ChannelGradients::zeros(intr);
  for (std::size_t i = 0; i < up.color.size(); ++i) up.color[i] = 1e-3;
  for (std::size_t i = 0; i < up.depth.size(); ++i) up.depth[i] = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(render_backward(map, fwd, up));
  state.SetItemsProcessed(state.iterations() * intr.width * intr.height);
}
BENCHMARK(BM_RenderBackward)->Args({64, 1000})->Args({64, 5000})->Unit(benchmark::kMillisecond);

void BM_RenderThreads(benchmark::State& state) {
  const CameraIntrinsics intr = CameraIntrinsics::desk(160, 120);
  const GaussianMap map = bench::random_scene(5000, intr);
  RenderOptions opts;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(render(map, Pose::identity(), intr, opts));
}
BENCHMARK(BM_RenderThreads)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
