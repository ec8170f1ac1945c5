#include "stylefool/feature_net.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "stylefool/error.hpp"
#include "stylefool/rng.hpp"

namespace stylefool {

template <typename T>
FeatureNetT<T>::FeatureNetT(std::vector<FeatureLayer<T>> layers) : layers_(std::move(layers)) {
  int channels = -1;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (layers_[j].name == l.name) throw ValidationError("duplicate layer name '" + l.name + "'");
    }
    if (l.kind != LayerKind::kConv3x3) continue;
    if (l.conv.in_channels < 1 || l.conv.out_channels < 1) {
      throw ValidationError("layer '" + l.name + "' has empty channel counts");
    }
    if (l.conv.weights.size() != std::size_t(l.conv.in_channels) * l.conv.out_channels * 9 ||
        l.conv.bias.size() != std::size_t(l.conv.out_channels)) {
      throw ValidationError("layer '" + l.name + "' has inconsistent parameter counts");
    }
    if (channels == -1) {
      input_channels_ = l.conv.in_channels;
    } else if (channels != l.conv.in_channels) {
      throw ValidationError("layer '" + l.name + "' expects " +
                            std::to_string(l.conv.in_channels) + " channels but receives " +
                            std::to_string(channels));
    }
    channels = l.conv.out_channels;
    for (T w : l.conv.weights) {
      if (!std::isfinite(static_cast<double>(w))) {
        throw ValidationError("layer '" + l.name + "' has non-finite weights");
      }
    }
  }
  if (channels == -1) throw ValidationError("feature network has no convolution layer");
}

template <typename T>
int FeatureNetT<T>::layer_index(std::string_view name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name == name) return static_cast<int>(i);
  }
  throw ValidationError("feature network has no layer named '" + std::string(name) + "'");
}

template <typename T>
bool FeatureNetT<T>::has_layer(std::string_view name) const noexcept {
  return std::any_of(layers_.begin(), layers_.end(), [&](const auto& l) { return l.name == name; });
}

template <typename T>
ForwardTrace<T> forward_trace(const FeatureNetT<T>& net, nn::Grid<T> input, int depth) {
  if (input.channels != net.input_channels()) {
    throw ValidationError("image has " + std::to_string(input.channels) +
                          " channels, network expects " + std::to_string(net.input_channels()));
  }
  const auto& layers = net.layers();
  const int n = depth < 0 ? static_cast<int>(layers.size())
                          : std::min<int>(depth, static_cast<int>(layers.size()));
  ForwardTrace<T> trace;
  trace.input = std::move(input);
  trace.depth = n;
  trace.outputs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const nn::Grid<T>& x = i == 0 ? trace.input : trace.outputs.back();
    switch (layers[i].kind) {
      case LayerKind::kConv3x3:
        trace.outputs.push_back(nn::conv3x3_forward(x, layers[i].conv));
        break;
      case LayerKind::kRelu:
        trace.outputs.push_back(nn::relu_forward(x));
        break;
      case LayerKind::kAvgPool2:
        trace.outputs.push_back(nn::avgpool2_forward(x));
        break;
    }
  }
  return trace;
}

template <typename T>
FeatureMapStack<T> forward(const FeatureNetT<T>& net, const nn::Grid<T>& input,
                           const std::vector<std::string>& taps) {
  int deepest = 0;
  for (const auto& t : taps) deepest = std::max(deepest, net.layer_index(t) + 1);
  auto trace = forward_trace(net, input, deepest);
  FeatureMapStack<T> out;
  for (const auto& t : taps) out.emplace(t, trace.outputs[net.layer_index(t)]);
  return out;
}

template <typename T>
nn::Grid<T> backward_to_input(const FeatureNetT<T>& net, const ForwardTrace<T>& trace,
                              const FeatureMapStack<T>& tap_grads) {
  const auto& layers = net.layers();
  int deepest = 0;
  for (const auto& [name, g] : tap_grads) {
    const int idx = net.layer_index(name);
    if (idx >= trace.depth) throw ValidationError("tap '" + name + "' was not evaluated");
    if (!g.same_shape(trace.outputs[idx])) {
      throw ValidationError("gradient for tap '" + name + "' has the wrong shape");
    }
    deepest = std::max(deepest, idx + 1);
  }
  if (deepest == 0) {
    return nn::Grid<T>(trace.input.height, trace.input.width, trace.input.channels);
  }

  nn::Grid<T> grad;
  bool have_grad = false;
  for (int i = deepest - 1; i >= 0; --i) {
    if (auto it = tap_grads.find(layers[i].name); it != tap_grads.end()) {
      if (!have_grad) {
        grad = it->second;
        have_grad = true;
      } else {
        for (std::size_t k = 0; k < grad.data.size(); ++k) grad.data[k] += it->second.data[k];
      }
    }
    if (!have_grad) continue;
    const nn::Grid<T>& in = i == 0 ? trace.input : trace.outputs[i - 1];
    switch (layers[i].kind) {
      case LayerKind::kConv3x3:
        grad = nn::conv3x3_backward_input(grad, layers[i].conv);
        break;
      case LayerKind::kRelu:
        grad = nn::relu_backward(trace.outputs[i], std::move(grad));
        break;
      case LayerKind::kAvgPool2:
        grad = nn::avgpool2_backward(grad, in.height, in.width);
        break;
    }
  }
  return grad;
}

template <typename T>
nn::Grid<T> backward_to_input(const FeatureNetT<T>& net, const nn::Grid<T>& input,
                              const FeatureMapStack<T>& tap_grads) {
  int deepest = 0;
  for (const auto& [name, g] : tap_grads) deepest = std::max(deepest, net.layer_index(name) + 1);
  return backward_to_input(net, forward_trace(net, input, deepest), tap_grads);
}

template <typename T>
GramMatrix<T> gram(const nn::Grid<T>& features) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (features.data.empty()) throw ValidationError("gram of an empty feature grid");
  const auto m = static_cast<Eigen::Index>(features.pixels());
  Eigen::Map<const Mat> f(features.data.data(), m, features.channels);
  GramMatrix<T> g;
  g.channels = features.channels;
  g.positions = features.pixels();
  g.values.resize(std::size_t(features.channels) * features.channels);
  Eigen::Map<Mat> out(g.values.data(), features.channels, features.channels);
  out.noalias() = f.transpose() * f;
  out /= static_cast<T>(m);
  // The GEMM kernel may round the two triangles differently.
  out.template triangularView<Eigen::StrictlyLower>() = out.transpose();
  return g;
}

template class FeatureNetT<float>;
template class FeatureNetT<double>;
template ForwardTrace<float> forward_trace(const FeatureNetT<float>&, nn::Grid<float>, int);
template ForwardTrace<double> forward_trace(const FeatureNetT<double>&, nn::Grid<double>, int);
template FeatureMapStack<float> forward(const FeatureNetT<float>&, const nn::Grid<float>&,
                                        const std::vector<std::string>&);
template FeatureMapStack<double> forward(const FeatureNetT<double>&, const nn::Grid<double>&,
                                         const std::vector<std::string>&);
template nn::Grid<float> backward_to_input(const FeatureNetT<float>&, const ForwardTrace<float>&,
                                           const FeatureMapStack<float>&);
template nn::Grid<double> backward_to_input(const FeatureNetT<double>&,
                                            const ForwardTrace<double>&,
                                            const FeatureMapStack<double>&);
template nn::Grid<float> backward_to_input(const FeatureNetT<float>&, const nn::Grid<float>&,
                                           const FeatureMapStack<float>&);
template nn::Grid<double> backward_to_input(const FeatureNetT<double>&, const nn::Grid<double>&,
                                            const FeatureMapStack<double>&);
template GramMatrix<float> gram(const nn::Grid<float>&);
template GramMatrix<double> gram(const nn::Grid<double>&);

FeatureNet load_weights(const std::filesystem::path& path) {
  detail::BinaryReader in(path.string());
  in.expect_magic("FWF1");
  const std::uint32_t count = in.u32();
  std::vector<FeatureLayer<float>> layers;
  layers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureLayer<float> layer;
    layer.name = in.bytes(in.u8());
    const std::uint8_t kind = in.u8();
    if (kind > 2) {
      throw FormatError("'" + path.string() + "': layer '" + layer.name + "' has unknown kind " +
                        std::to_string(kind));
    }
    layer.kind = static_cast<LayerKind>(kind);
    if (layer.kind == LayerKind::kConv3x3) {
      const std::uint32_t in_ch = in.u32();
      const std::uint32_t out_ch = in.u32();
      if (in_ch == 0 || out_ch == 0 || in_ch > 4096 || out_ch > 4096) {
        throw FormatError("'" + path.string() + "': implausible channel counts in '" +
                          layer.name + "'");
      }
      layer.conv = nn::Conv3x3<float>(static_cast<int>(in_ch), static_cast<int>(out_ch));
      in.f32s(layer.conv.weights);
      in.f32s(layer.conv.bias);
    }
    layers.push_back(std::move(layer));
  }
  if (in.remaining() != 0) throw FormatError("'" + path.string() + "': trailing bytes");
  try {
    return FeatureNet(std::move(layers));
  } catch (const ValidationError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

void save_weights(const FeatureNet& net, const std::filesystem::path& path) {
  detail::BinaryWriter out(path.string());
  out.magic("FWF1");
  out.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    if (l.name.size() > 255) throw ValidationError("layer name too long: " + l.name);
    out.u8(static_cast<std::uint8_t>(l.name.size()));
    out.bytes(l.name);
    out.u8(static_cast<std::uint8_t>(l.kind));
    if (l.kind == LayerKind::kConv3x3) {
      out.u32(static_cast<std::uint32_t>(l.conv.in_channels));
      out.u32(static_cast<std::uint32_t>(l.conv.out_channels));
      out.f32s(l.conv.weights);
      out.f32s(l.conv.bias);
    }
  }
  out.finish();
}

namespace {

/// Rows (or columns, when out > fan_in) of a Gaussian matrix orthonormalised by QR.
nn::Conv3x3<float> orthogonal_conv(int in, int out, double gain, SeededRng& rng) {
  const int fan_in = 9 * in;
  const int rows = std::max(out, fan_in);
  const int cols = std::min(out, fan_in);
  Eigen::MatrixXd a(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) a(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Fix signs so the factorisation is unique.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (int c = 0; c < cols; ++c) {
    if (r(c, c) < 0) q.col(c) *= -1.0;
  }
  // w is out x fan_in.
  Eigen::MatrixXd w = out <= fan_in ? Eigen::MatrixXd(q.transpose()) : q;
  nn::Conv3x3<float> conv(in, out);
  for (int o = 0; o < out; ++o) {
    for (int k = 0; k < fan_in; ++k) conv.weights[std::size_t(o) * fan_in + k] =
        static_cast<float>(gain * w(o, k));
  }
  return conv;
}

}  // namespace

FeatureNet make_default_feature_net(std::uint64_t seed, double gain) {
  SeededRng rng(seed, 0x46574631);
  std::vector<FeatureLayer<float>> layers;
  auto conv = [&](const std::string& name, int in, int out) {
    layers.push_back({name, LayerKind::kConv3x3, orthogonal_conv(in, out, gain, rng)});
  };
  auto relu = [&](const std::string& name) { layers.push_back({name, LayerKind::kRelu, {}}); };
  auto pool = [&](const std::string& name) { layers.push_back({name, LayerKind::kAvgPool2, {}}); };
  conv("conv1_1", 3, 16);
  relu("relu1_1");
  conv("conv1_2", 16, 16);
  relu("relu1_2");
  pool("pool1");
  conv("conv2_1", 16, 32);
  relu("relu2_1");
  pool("pool2");
  conv("conv3_1", 32, 64);
  relu("relu3_1");
  pool("pool3");
  conv("conv4_1", 64, 128);
  relu("relu4_1");
  conv("conv4_2", 128, 128);
  relu("relu4_2");
  pool("pool4");
  conv("conv5_1", 128, 128);
  relu("relu5_1");
  return FeatureNet(std::move(layers));
}

}  // namespace stylefool
