#include <benchmark/benchmark.h>

#include "stylefool/feature_net.hpp"
#include "stylefool/rng.hpp"
#include "stylefool/style_transfer.hpp"

namespace {

using namespace stylefool;

nn::Grid<float> random_grid(int h, int w, int c, std::uint64_t seed) {
  SeededRng rng(seed);
  nn::Grid<float> g(h, w, c);
  for (auto& v : g.data) v = static_cast<float>(rng.uniform());
  return g;
}

const FeatureNet& net() {
  static const FeatureNet n = make_default_feature_net(kDefaultFeatureSeed, kDefaultFeatureGain);
  return n;
}

void BM_Conv3x3Forward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int channels = static_cast<int>(state.range(1));
  const auto in = random_grid(size, size, channels, 1);
  nn::Conv3x3<float> conv(channels, channels);
  SeededRng rng(2);
  for (auto& w : conv.weights) w = static_cast<float>(rng.normal() * 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv3x3_forward(in, conv));
}
BENCHMARK(BM_Conv3x3Forward)->Args({32, 16})->Args({16, 32})->Args({8, 64});

void BM_FeatureForward(benchmark::State& state) {
  const auto in = random_grid(32, 32, 3, 3);
  const FeatureTaps taps;
  std::vector<std::string> all = taps.style;
  all.insert(all.end(), taps.content.begin(), taps.content.end());
  for (auto _ : state) benchmark::DoNotOptimize(forward(net(), in, all));
}
BENCHMARK(BM_FeatureForward);

void BM_StyleLossWithGradient(benchmark::State& state) {
  const auto frame = random_grid(32, 32, 3, 4);
  const auto style = random_grid(32, 32, 3, 5);
  for (auto _ : state) benchmark::DoNotOptimize(style_loss(frame, style, net()));
}
BENCHMARK(BM_StyleLossWithGradient);

void BM_TransferIteration(benchmark::State& state) {
  SeededRng rng(6);
  std::vector<float> px(16 * 32 * 32 * 3);
  for (auto& v : px) v = static_cast<float>(rng.uniform());
  const VideoTensor clip(16, 32, 32, 3, std::move(px));
  const auto style = clip.frame(3);
  const auto flows = clip_flows(clip);
  TransferConfig cfg;
  cfg.iterations = 1;
  for (auto _ : state) benchmark::DoNotOptimize(transfer(clip, style, net(), cfg, flows));
}
BENCHMARK(BM_TransferIteration)->Unit(benchmark::kMillisecond);

}  // namespace
