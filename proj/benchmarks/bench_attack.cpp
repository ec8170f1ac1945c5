#include <benchmark/benchmark.h>

#include "stylefool/blackbox_attack.hpp"
#include "stylefool/classifier.hpp"

namespace {

using namespace stylefool;

VideoTensor random_clip(std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<float> px(16 * 32 * 32 * 3);
  for (auto& v : px) v = static_cast<float>(rng.uniform());
  return VideoTensor(16, 32, 32, 3, std::move(px));
}

void BM_ToyClassifierQuery(benchmark::State& state) {
  SeededRng rng(1);
  auto model = ToyClassifier::initialize(rng);
  const auto clip = random_clip(2);
  for (auto _ : state) benchmark::DoNotOptimize(model.classify(clip));
}
BENCHMARK(BM_ToyClassifierQuery)->Unit(benchmark::kMicrosecond);

// Estimator overhead with a free oracle, at clip dimensionality.
void BM_NesGradient(benchmark::State& state) {
  const auto clip = random_clip(3);
  const std::vector<double> x(clip.data().begin(), clip.data().end());
  NesConfig cfg;
  cfg.n = static_cast<int>(state.range(0));
  std::uint64_t round = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        nes_gradient([](std::span<const double> p) { return p[0]; }, x, cfg, round++));
  }
}
BENCHMARK(BM_NesGradient)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Project(benchmark::State& state) {
  const auto a = random_clip(4), b = random_clip(5);
  for (auto _ : state) benchmark::DoNotOptimize(project(a, b, 0.05));
}
BENCHMARK(BM_Project)->Unit(benchmark::kMicrosecond);

}  // namespace
