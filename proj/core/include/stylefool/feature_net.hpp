#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stylefool/nn.hpp"
#include "stylefool/tensor.hpp"

namespace stylefool {

enum class LayerKind : std::uint8_t { kConv3x3 = 0, kRelu = 1, kAvgPool2 = 2 };

template <typename T>
struct FeatureLayer {
  std::string name;
  LayerKind kind = LayerKind::kRelu;
  nn::Conv3x3<T> conv;  // populated for kConv3x3 only
};

/// Layer names whose activations feed the content and style losses.
struct FeatureTaps {
  std::vector<std::string> content{"relu4_2"};
  std::vector<std::string> style{"relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu5_1"};
};

/// Fixed conv/relu/avgpool stack. Immutable after construction.
template <typename T>
class FeatureNetT {
 public:
  FeatureNetT() = default;
  /// Validates channel chaining and unique layer names.
  explicit FeatureNetT(std::vector<FeatureLayer<T>> layers);

  const std::vector<FeatureLayer<T>>& layers() const noexcept { return layers_; }
  int input_channels() const noexcept { return input_channels_; }
  /// Throws ValidationError when no layer has this name.
  int layer_index(std::string_view name) const;
  bool has_layer(std::string_view name) const noexcept;

  template <typename U>
  FeatureNetT<U> cast() const {
    std::vector<FeatureLayer<U>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back({l.name, l.kind, l.conv.template cast<U>()});
    return FeatureNetT<U>(std::move(out));
  }

 private:
  std::vector<FeatureLayer<T>> layers_;
  int input_channels_ = 0;
};

using FeatureNet = FeatureNetT<float>;

/// Activations of selected layers, keyed by layer name.
template <typename T>
using FeatureMapStack = std::map<std::string, nn::Grid<T>, std::less<>>;

/// Input plus every layer output, kept for the backward pass.
template <typename T>
struct ForwardTrace {
  nn::Grid<T> input;
  std::vector<nn::Grid<T>> outputs;
  int depth = 0;  // number of layers evaluated
};

/// Runs the first `depth` layers (all when negative).
template <typename T>
ForwardTrace<T> forward_trace(const FeatureNetT<T>& net, nn::Grid<T> input, int depth = -1);

/// Activations at the named layers; stops after the deepest one.
template <typename T>
FeatureMapStack<T> forward(const FeatureNetT<T>& net, const nn::Grid<T>& input,
                           const std::vector<std::string>& taps);

/// Gradient of sum_k <tap_grads[k], activation_k(image)> with respect to the input.
template <typename T>
nn::Grid<T> backward_to_input(const FeatureNetT<T>& net, const ForwardTrace<T>& trace,
                              const FeatureMapStack<T>& tap_grads);

template <typename T>
nn::Grid<T> backward_to_input(const FeatureNetT<T>& net, const nn::Grid<T>& input,
                              const FeatureMapStack<T>& tap_grads);

/// C x C Gram matrix normalised by the number of spatial positions M = H*W.
template <typename T>
struct GramMatrix {
  int channels = 0;
  std::size_t positions = 0;
  std::vector<T> values;  // row-major C x C

  T at(int a, int b) const noexcept { return values[std::size_t(a) * channels + b]; }
};

template <typename T>
GramMatrix<T> gram(const nn::Grid<T>& features);

/// FWF1 weight file codec.
FeatureNet load_weights(const std::filesystem::path& path);
void save_weights(const FeatureNet& net, const std::filesystem::path& path);

/// Default desk-scale architecture with seeded orthogonal kernels scaled by
/// `gain` and zero biases:
/// conv1_1(3->16) relu1_1 conv1_2 relu1_2 pool1 conv2_1(->32) relu2_1 pool2
/// conv3_1(->64) relu3_1 pool3 conv4_1(->128) relu4_1 conv4_2 relu4_2 pool4
/// conv5_1(->128) relu5_1.
FeatureNet make_default_feature_net(std::uint64_t seed, double gain);

/// Seed and gain of the weights shipped in assets/feature_net.fwf.
inline constexpr std::uint64_t kDefaultFeatureSeed = 20220404;
inline constexpr double kDefaultFeatureGain = 1.6;

}  // namespace stylefool
