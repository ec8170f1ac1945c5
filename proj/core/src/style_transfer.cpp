#include "stylefool/style_transfer.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "stylefool/error.hpp"

namespace stylefool {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_same(const auto& a, const auto& b, const char* what) {
  if (!a.same_shape(b)) throw ValidationError(std::string(what) + ": frame dimensions differ");
}

template <typename T>
void accumulate(FeatureMapStack<T>& grads, const std::string& name, nn::Grid<T> g) {
  auto [it, inserted] = grads.try_emplace(name, std::move(g));
  if (!inserted) {
    for (std::size_t i = 0; i < it->second.data.size(); ++i) it->second.data[i] += g.data[i];
  }
}

int deepest_tap(const FeatureNet& net, const FeatureTaps& taps) {
  int d = 0;
  for (const auto& t : taps.content) d = std::max(d, net.layer_index(t) + 1);
  for (const auto& t : taps.style) d = std::max(d, net.layer_index(t) + 1);
  return d;
}

template <typename T>
int deepest_tap(const FeatureNetT<T>& net, const std::vector<std::string>& names) {
  int d = 0;
  for (const auto& t : names) d = std::max(d, net.layer_index(t) + 1);
  return d;
}

/// Adds scale * dL/dphi for each content tap; returns the unscaled loss.
template <typename T>
double content_terms(const FeatureNetT<T>& net, const ForwardTrace<T>& trace,
                     const FeatureMapStack<T>& targets, const std::vector<std::string>& taps,
                     T scale, FeatureMapStack<T>* grads) {
  double loss = 0.0;
  for (const auto& name : taps) {
    const auto& f = trace.outputs[net.layer_index(name)];
    const auto& target = targets.find(name)->second;
    const double norm = 1.0 / static_cast<double>(f.size());
    double sum = 0.0;
    nn::Grid<T> g(f.height, f.width, f.channels);
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      const double d = double(f.data[i]) - double(target.data[i]);
      sum += d * d;
      g.data[i] = static_cast<T>(2.0 * norm * d) * scale;
    }
    loss += norm * sum;
    if (grads) accumulate(*grads, name, std::move(g));
  }
  return loss;
}

template <typename T>
double style_terms(const FeatureNetT<T>& net, const ForwardTrace<T>& trace,
                   const std::map<std::string, GramMatrix<T>, std::less<>>& targets,
                   const std::vector<std::string>& taps, T scale, FeatureMapStack<T>* grads) {
  double loss = 0.0;
  for (const auto& name : taps) {
    const auto& f = trace.outputs[net.layer_index(name)];
    const auto g = gram(f);
    const auto& target = targets.find(name)->second;
    const int c = f.channels;
    const double inv_c2 = 1.0 / (double(c) * c);
    RowMatrix<T> diff(c, c);
    double sum = 0.0;
    for (int a = 0; a < c; ++a) {
      for (int b = 0; b < c; ++b) {
        const double d = double(g.at(a, b)) - double(target.at(a, b));
        diff(a, b) = static_cast<T>(d);
        sum += d * d;
      }
    }
    loss += inv_c2 * sum;
    if (grads) {
      // d/dF of ||G - S||^2 / C^2 with G = F^T F / M is 4 F (G - S) / (C^2 M).
      nn::Grid<T> grad(f.height, f.width, c);
      const auto m = static_cast<Eigen::Index>(f.pixels());
      Eigen::Map<const RowMatrix<T>> fm(f.data.data(), m, c);
      Eigen::Map<RowMatrix<T>> gm(grad.data.data(), m, c);
      const T k = static_cast<T>(4.0 * inv_c2 / static_cast<double>(m)) * scale;
      gm.noalias() = k * (fm * diff);
      accumulate(*grads, name, std::move(grad));
    }
  }
  return loss;
}

template <typename T>
std::map<std::string, GramMatrix<T>, std::less<>> style_targets(const FeatureNetT<T>& net,
                                                                 const nn::Grid<T>& style,
                                                                 const std::vector<std::string>& taps) {
  std::map<std::string, GramMatrix<T>, std::less<>> out;
  for (auto& [name, f] : forward(net, style, taps)) out.emplace(name, gram(f));
  return out;
}

template <typename T>
double tv_terms(const nn::Grid<T>& x, T scale, nn::Grid<T>* grad) {
  double loss = 0.0;
  for (int y = 0; y < x.height; ++y) {
    for (int xx = 0; xx < x.width; ++xx) {
      for (int c = 0; c < x.channels; ++c) {
        const double v = x.at(y, xx, c);
        if (y + 1 < x.height) {
          const double d = v - double(x.at(y + 1, xx, c));
          loss += d * d;
          if (grad) {
            grad->at(y, xx, c) += static_cast<T>(2.0 * d) * scale;
            grad->at(y + 1, xx, c) -= static_cast<T>(2.0 * d) * scale;
          }
        }
        if (xx + 1 < x.width) {
          const double d = v - double(x.at(y, xx + 1, c));
          loss += d * d;
          if (grad) {
            grad->at(y, xx, c) += static_cast<T>(2.0 * d) * scale;
            grad->at(y, xx + 1, c) -= static_cast<T>(2.0 * d) * scale;
          }
        }
      }
    }
  }
  return loss;
}

template <typename T>
double temporal_terms(const nn::Grid<T>& prev, const nn::Grid<T>& next, const FlowField& flow,
                      T scale, nn::Grid<T>* grad_prev, nn::Grid<T>* grad_next) {
  if (prev.height != flow.height || prev.width != flow.width) {
    throw ValidationError("temporal_loss: flow does not match frame dimensions");
  }
  const auto warped = warp(prev, flow);
  const double norm = 1.0 / static_cast<double>(prev.size());
  nn::Grid<T> residual_grad(prev.height, prev.width, prev.channels);
  double sum = 0.0;
  for (int y = 0; y < prev.height; ++y) {
    for (int x = 0; x < prev.width; ++x) {
      const double m = flow.mask[std::size_t(y) * prev.width + x];
      if (m == 0.0) continue;
      for (int c = 0; c < prev.channels; ++c) {
        const double r = double(next.at(y, x, c)) - double(warped.at(y, x, c));
        sum += m * r * r;
        residual_grad.at(y, x, c) = static_cast<T>(2.0 * norm * m * r) * scale;
      }
    }
  }
  if (grad_next) {
    for (std::size_t i = 0; i < residual_grad.data.size(); ++i) {
      grad_next->data[i] += residual_grad.data[i];
    }
  }
  if (grad_prev) {
    const auto back = warp_transpose(residual_grad, flow);
    for (std::size_t i = 0; i < back.data.size(); ++i) grad_prev->data[i] -= back.data[i];
  }
  return norm * sum;
}

}  // namespace

void TransferConfig::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0 || lambda < 0) {
    throw ValidationError("transfer weights must be non-negative");
  }
  if (iterations < 1) throw ValidationError("transfer needs at least one iteration");
  if (!(step_size > 0)) throw ValidationError("transfer step size must be positive");
}

double weighted_total(const LossBreakdown& p, const TransferConfig& cfg) {
  return cfg.alpha * p.content + cfg.beta * p.style + cfg.gamma * p.tv + cfg.lambda * p.temporal;
}

template <typename T>
LossAndGrad<T> content_loss(const nn::Grid<T>& x, const nn::Grid<T>& xs, const FeatureNetT<T>& net,
                            const FeatureTaps& taps) {
  check_same(x, xs, "content_loss");
  const auto targets = forward(net, x, taps.content);
  const auto trace = forward_trace(net, xs, deepest_tap(net, taps.content));
  FeatureMapStack<T> grads;
  LossAndGrad<T> out;
  out.value = content_terms(net, trace, targets, taps.content, T(1), &grads);
  out.grad = backward_to_input(net, trace, grads);
  return out;
}

template <typename T>
LossAndGrad<T> style_loss(const nn::Grid<T>& xs, const nn::Grid<T>& style,
                          const FeatureNetT<T>& net, const FeatureTaps& taps) {
  const auto targets = style_targets(net, style, taps.style);
  const auto trace = forward_trace(net, xs, deepest_tap(net, taps.style));
  FeatureMapStack<T> grads;
  LossAndGrad<T> out;
  out.value = style_terms(net, trace, targets, taps.style, T(1), &grads);
  out.grad = backward_to_input(net, trace, grads);
  return out;
}

template <typename T>
LossAndGrad<T> tv_loss(const nn::Grid<T>& frame) {
  LossAndGrad<T> out;
  out.grad = nn::Grid<T>(frame.height, frame.width, frame.channels);
  out.value = tv_terms(frame, T(1), &out.grad);
  return out;
}

template <typename T>
PairLossAndGrad<T> temporal_loss(const nn::Grid<T>& prev, const nn::Grid<T>& next,
                                 const FlowField& flow) {
  check_same(prev, next, "temporal_loss");
  PairLossAndGrad<T> out;
  out.grad_prev = nn::Grid<T>(prev.height, prev.width, prev.channels);
  out.grad_next = nn::Grid<T>(prev.height, prev.width, prev.channels);
  out.value = temporal_terms(prev, next, flow, T(1), &out.grad_prev, &out.grad_next);
  return out;
}

#define STYLEFOOL_LOSS_INSTANTIATE(T)                                                          \
  template LossAndGrad<T> content_loss(const nn::Grid<T>&, const nn::Grid<T>&,                 \
                                       const FeatureNetT<T>&, const FeatureTaps&);             \
  template LossAndGrad<T> style_loss(const nn::Grid<T>&, const nn::Grid<T>&,                   \
                                     const FeatureNetT<T>&, const FeatureTaps&);               \
  template LossAndGrad<T> tv_loss(const nn::Grid<T>&);                                         \
  template PairLossAndGrad<T> temporal_loss(const nn::Grid<T>&, const nn::Grid<T>&,            \
                                            const FlowField&);
STYLEFOOL_LOSS_INSTANTIATE(float)
STYLEFOOL_LOSS_INSTANTIATE(double)
#undef STYLEFOOL_LOSS_INSTANTIATE

std::vector<FlowField> clip_flows(const VideoTensor& video, const BlockMatchParams& params) {
  std::vector<FlowField> flows;
  for (int t = 0; t + 1 < video.frames(); ++t) {
    // Flow on frame t+1 pointing into frame t, so warp(frame t) lines up with t+1.
    flows.push_back(estimate_flow(video.frame(t + 1), video.frame(t), params));
  }
  return flows;
}

namespace {

/// Objective over a clip held as float grids; optionally fills per-frame gradients.
class ClipObjective {
 public:
  ClipObjective(const VideoTensor& video, const ImageTensor& style, const FeatureNet& net,
                const TransferConfig& cfg, const std::vector<FlowField>& flows)
      : net_(net), cfg_(cfg), flows_(flows), depth_(deepest_tap(net, cfg.taps)) {
    if (style.channels() != video.channels()) {
      throw ValidationError("style image and clip differ in channel count");
    }
    if (static_cast<int>(flows.size()) != video.frames() - 1) {
      throw ValidationError("need one flow field per consecutive frame pair");
    }
    for (const auto& f : flows) {
      if (f.height != video.height() || f.width != video.width()) {
        throw ValidationError("flow field does not match clip dimensions");
      }
    }
    style_grams_ = style_targets(net, nn::to_grid<float>(style), cfg.taps.style);
    for (int t = 0; t < video.frames(); ++t) {
      content_targets_.push_back(forward(
          net, nn::to_grid<float>(video.frame_data(t), video.height(), video.width(),
                                  video.channels()),
          cfg.taps.content));
    }
  }

  LossBreakdown evaluate(const std::vector<nn::Grid<float>>& frames,
                         std::vector<nn::Grid<float>>* grads) const {
    LossBreakdown parts;
    const auto a = static_cast<float>(cfg_.alpha), b = static_cast<float>(cfg_.beta);
    const auto g = static_cast<float>(cfg_.gamma), l = static_cast<float>(cfg_.lambda);
    if (grads) {
      grads->clear();
      for (const auto& f : frames) grads->emplace_back(f.height, f.width, f.channels);
    }
    // Reduction order is fixed by frame index.
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto trace = forward_trace(net_, frames[t], depth_);
      FeatureMapStack<float> taps;
      auto* tap_ptr = grads ? &taps : nullptr;
      parts.content += content_terms(net_, trace, content_targets_[t], cfg_.taps.content, a, tap_ptr);
      parts.style += style_terms(net_, trace, style_grams_, cfg_.taps.style, b, tap_ptr);
      parts.tv += tv_terms(frames[t], g, grads ? &(*grads)[t] : nullptr);
      if (grads) {
        const auto pix = backward_to_input(net_, trace, taps);
        auto& dst = (*grads)[t].data;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += pix.data[i];
      }
    }
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
      parts.temporal += temporal_terms(frames[t], frames[t + 1], flows_[t], l,
                                       grads ? &(*grads)[t] : nullptr,
                                       grads ? &(*grads)[t + 1] : nullptr);
    }
    parts.total = weighted_total(parts, cfg_);
    return parts;
  }

 private:
  const FeatureNet& net_;
  const TransferConfig& cfg_;
  const std::vector<FlowField>& flows_;
  int depth_;
  std::map<std::string, GramMatrix<float>, std::less<>> style_grams_;
  std::vector<FeatureMapStack<float>> content_targets_;
};

std::vector<nn::Grid<float>> to_frames(const VideoTensor& v) {
  std::vector<nn::Grid<float>> frames;
  for (int t = 0; t < v.frames(); ++t) {
    frames.push_back(nn::to_grid<float>(v.frame_data(t), v.height(), v.width(), v.channels()));
  }
  return frames;
}

}  // namespace

TransferResult transfer(const VideoTensor& video, const ImageTensor& style, const FeatureNet& net,
                        const TransferConfig& cfg, std::optional<std::vector<FlowField>> flows,
                        const std::function<void(int, const LossBreakdown&)>& progress) {
  cfg.validate();
  if (!flows) flows = clip_flows(video);
  const ClipObjective objective(video, style, net, cfg, *flows);

  auto frames = to_frames(video);
  std::vector<std::vector<float>> m1(frames.size()), m2(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    m1[t].assign(frames[t].size(), 0.0f);
    m2[t].assign(frames[t].size(), 0.0f);
  }

  TransferResult result;
  result.trace.reserve(cfg.iterations + 1);
  std::vector<nn::Grid<float>> grads;
  double bias1 = 1.0, bias2 = 1.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const LossBreakdown parts = objective.evaluate(frames, &grads);
    if (!std::isfinite(parts.total)) {
      throw DivergenceError("style transfer loss became non-finite at iteration " +
                                std::to_string(it),
                            it);
    }
    result.trace.push_back(parts);
    if (progress) progress(it, parts);

    bias1 *= cfg.beta1;
    bias2 *= cfg.beta2;
    const double lr = cfg.step_size * std::sqrt(1.0 - bias2) / (1.0 - bias1);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      auto& x = frames[t].data;
      const auto& g = grads[t].data;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double gi = g[i];
        m1[t][i] = static_cast<float>(cfg.beta1 * m1[t][i] + (1.0 - cfg.beta1) * gi);
        m2[t][i] = static_cast<float>(cfg.beta2 * m2[t][i] + (1.0 - cfg.beta2) * gi * gi);
        const double step = lr * m1[t][i] / (std::sqrt(double(m2[t][i])) + cfg.adam_epsilon);
        x[i] = std::clamp(static_cast<float>(x[i] - step), 0.0f, 1.0f);
      }
    }
  }
  const LossBreakdown final_parts = objective.evaluate(frames, nullptr);
  if (!std::isfinite(final_parts.total)) {
    throw DivergenceError("style transfer loss became non-finite after the last iteration",
                          cfg.iterations);
  }
  result.trace.push_back(final_parts);

  std::vector<float> data;
  data.reserve(video.size());
  for (const auto& f : frames) data.insert(data.end(), f.data.begin(), f.data.end());
  result.stylized = VideoTensor(video.frames(), video.height(), video.width(), video.channels(),
                                std::move(data));
  return result;
}

LossBreakdown evaluate_transfer_loss(const VideoTensor& video, const VideoTensor& stylized,
                                     const ImageTensor& style, const FeatureNet& net,
                                     const TransferConfig& cfg,
                                     const std::vector<FlowField>& flows) {
  if (!video.same_shape(stylized)) throw ValidationError("stylized clip shape differs from source");
  const ClipObjective objective(video, style, net, cfg, flows);
  return objective.evaluate(to_frames(stylized), nullptr);
}

}  // namespace stylefool
