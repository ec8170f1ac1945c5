#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "stylefool/feature_net.hpp"
#include "stylefool/nn.hpp"
#include "stylefool/optical_flow.hpp"
#include "stylefool/tensor.hpp"

namespace stylefool {

/// Weights and schedule for whole-clip style transfer.
struct TransferConfig {
  double alpha = 10.0;     // content
  double beta = 50.0;      // style (75 for targeted runs)
  double gamma = 1e-3;     // total variation
  double lambda = 1e3;     // temporal
  int iterations = 300;
  double step_size = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  FeatureTaps taps;

  void validate() const;
};

/// Unweighted per-term sums over the clip and their weighted total.
struct LossBreakdown {
  double content = 0.0;
  double style = 0.0;
  double tv = 0.0;
  double temporal = 0.0;
  double total = 0.0;
};

/// total = alpha*content + beta*style + gamma*tv + lambda*temporal.
double weighted_total(const LossBreakdown& parts, const TransferConfig& cfg);

template <typename T>
struct LossAndGrad {
  double value = 0.0;
  nn::Grid<T> grad;
};

template <typename T>
struct PairLossAndGrad {
  double value = 0.0;
  nn::Grid<T> grad_prev;
  nn::Grid<T> grad_next;
};

/// Sum over content taps of ||phi(x) - phi(xs)||^2 / (H_k W_k C_k); gradient w.r.t. xs.
template <typename T>
LossAndGrad<T> content_loss(const nn::Grid<T>& x, const nn::Grid<T>& xs,
                            const FeatureNetT<T>& net, const FeatureTaps& taps = {});

/// Sum over style taps of ||G(s) - G(xs)||_F^2 / C_k^2; gradient w.r.t. xs.
template <typename T>
LossAndGrad<T> style_loss(const nn::Grid<T>& xs, const nn::Grid<T>& style,
                          const FeatureNetT<T>& net, const FeatureTaps& taps = {});

/// Sum of squared differences between vertical and horizontal neighbours.
template <typename T>
LossAndGrad<T> tv_loss(const nn::Grid<T>& frame);

/// mean over H*W*C of mask * (next - warp(prev))^2; gradients w.r.t. both frames.
template <typename T>
PairLossAndGrad<T> temporal_loss(const nn::Grid<T>& prev, const nn::Grid<T>& next,
                                 const FlowField& flow);

struct TransferResult {
  VideoTensor stylized;
  /// Loss before each update, plus one final entry for the returned clip.
  std::vector<LossBreakdown> trace;
};

/// Flow between consecutive clean frames (i -> i+1), as used by the temporal term.
std::vector<FlowField> clip_flows(const VideoTensor& video, const BlockMatchParams& params = {});

/// Minimises the whole-clip objective jointly over all frames with Adam,
/// starting from the clean clip and projecting onto [0,1] after every step.
/// `flows` defaults to clip_flows(video). `progress` is called once per iteration.
TransferResult transfer(const VideoTensor& video, const ImageTensor& style, const FeatureNet& net,
                        const TransferConfig& cfg,
                        std::optional<std::vector<FlowField>> flows = std::nullopt,
                        const std::function<void(int, const LossBreakdown&)>& progress = {});

/// Evaluates the objective (no optimisation) for a given stylized clip.
LossBreakdown evaluate_transfer_loss(const VideoTensor& video, const VideoTensor& stylized,
                                     const ImageTensor& style, const FeatureNet& net,
                                     const TransferConfig& cfg,
                                     const std::vector<FlowField>& flows);

}  // namespace stylefool
