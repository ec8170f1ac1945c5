#include <benchmark/benchmark.h>

#include "stylefool/color_themes.hpp"
#include "stylefool/metrics.hpp"
#include "stylefool/rng.hpp"

namespace {

using namespace stylefool;

VideoTensor random_clip(std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<float> px(16 * 32 * 32 * 3);
  for (auto& v : px) v = static_cast<float>(rng.uniform());
  return VideoTensor(16, 32, 32, 3, std::move(px));
}

void BM_Ssim(benchmark::State& state) {
  const auto a = random_clip(1), b = random_clip(2);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

void BM_Psnr(benchmark::State& state) {
  const auto a = random_clip(3), b = random_clip(4);
  for (auto _ : state) benchmark::DoNotOptimize(psnr(a, b));
}
BENCHMARK(BM_Psnr)->Unit(benchmark::kMicrosecond);

void BM_MedianCut(benchmark::State& state) {
  const auto frame = random_clip(5).frame(0);
  for (auto _ : state) benchmark::DoNotOptimize(median_cut(frame, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_MedianCut)->Arg(3)->Arg(8)->Unit(benchmark::kMicrosecond);

}  // namespace
