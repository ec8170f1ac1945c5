#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "stylefool/classifier.hpp"
#include "stylefool/style_selection.hpp"
#include "stylefool/transcript.hpp"

namespace stylefool {

inline constexpr double kDefaultEpsAdv = 0.05;
inline constexpr double kTargetedSigma = 1e-6;
inline constexpr double kUntargetedSigma = 1e-3;

struct NesConfig {
  int n = 64;
  double sigma = kUntargetedSigma;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class AttackMode { kUntargeted, kTargeted };
const char* attack_mode_name(AttackMode mode);
AttackMode parse_attack_mode(const std::string& name);

/// Untargeted (label = y0): p(y0) while y0 is top-1, else 0.
/// Targeted (label = yt): 1 - p(yt) while yt is top-1, else 2.
double adversarial_loss(const Prediction& pred, AttackMode mode, int label);

/// Scalar loss of a flattened input.
using LossOracle = std::function<double(std::span<const double>)>;

struct GradientEstimate {
  std::vector<double> grad;
  std::uint64_t samples_spent = 0;
};

/// Antithetic NES estimate at x. The n/2 directions are drawn from
/// SeededRng(cfg.seed, stream); the oracle sees x + s*d_1 ... x + s*d_{n/2},
/// then x - s*d_{n/2} ... x - s*d_1, and the estimate is
/// sum_i d_i (L(x + s d_i) - L(x - s d_i)) / (n s).
GradientEstimate nes_gradient(const LossOracle& oracle, std::span<const double> x,
                              const NesConfig& cfg, std::uint64_t stream = 0);

/// Clamp every value to [center - eps, center + eps], then to [0,1]. The float
/// result is guaranteed to lie within eps of center.
VideoTensor project(const VideoTensor& x, const VideoTensor& center, double eps);

/// Targeted start point: the candidate's source clip, or the tiled image when it has none.
VideoTensor to_video(const StyleCandidate& style, int frames = kClipFrames);

struct BpgdSchedule {
  double eps_step = 0.01;
  double min_eps_step = 1e-4;
  double eta = 0.02;
  double eta_max = 0.05;
  double eta_growth = 1.5;
  int accepts_before_growth = 3;
  int max_retries = 5;

  void validate() const;
};

/// Untargeted step rule. The sign step follows an exponential average of the
/// NES estimates. When the latest verification loss is above the lowest of the
/// previous plateau_rounds - 1, the step halves (down to min_eta) and the
/// window restarts.
struct UntargetedSchedule {
  double eta = 0.01;
  double momentum = 0.9;
  int plateau_rounds = 5;  // 0 keeps eta fixed
  double min_eta = 5e-4;

  void validate() const;
};

struct AttackResult {
  bool success = false;
  VideoTensor adversarial;
  std::uint64_t queries = 0;  // budget count when the attack stopped
  std::uint64_t rounds = 0;
  double epsilon = 0.0;       // radius of the final ball around the stylized clip
  Prediction last;            // last verification response
};

/// Sign-PGD inside the eps_adv ball around `stylized` until the label leaves y0.
/// An all-zero averaged component steps as if positive so a flat loss still moves.
AttackResult untargeted_attack(BlackBox& classifier, const VideoTensor& stylized, int y0,
                               const NesConfig& nes, double eps_adv, QueryBudget& budget,
                               Transcript* log = nullptr, const UntargetedSchedule& schedule = {});

/// Backtracking PGD: start from x_init (which must already be classified as
/// target) and shrink the ball around `stylized` from 1 to eps_adv while keeping
/// the target on top.
AttackResult targeted_attack(BlackBox& classifier, const VideoTensor& stylized,
                             const VideoTensor& x_init, int target, const NesConfig& nes,
                             double eps_adv, QueryBudget& budget, Transcript* log = nullptr,
                             const BpgdSchedule& schedule = {});

}  // namespace stylefool
