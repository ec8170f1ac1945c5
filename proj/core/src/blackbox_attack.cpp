#include "stylefool/blackbox_attack.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "stylefool/error.hpp"

namespace stylefool {

namespace {
// Slack when comparing radii that were reached by repeated subtraction.
constexpr double kEpsTolerance = 1e-9;
}  // namespace

void NesConfig::validate() const {
  if (n < 2 || n % 2 != 0) throw ValidationError("NES sample count must be even and >= 2");
  if (!(sigma > 0.0)) throw ValidationError("NES sigma must be positive");
}

void BpgdSchedule::validate() const {
  if (!(eps_step > 0.0) || !(min_eps_step > 0.0) || !(eta > 0.0) || !(eta_max >= eta) ||
      !(eta_growth >= 1.0) || accepts_before_growth < 1 || max_retries < 0) {
    throw ValidationError("invalid backtracking schedule");
  }
}

void UntargetedSchedule::validate() const {
  if (!(eta > 0.0) || !(momentum >= 0.0 && momentum < 1.0) || plateau_rounds < 0 ||
      plateau_rounds == 1 || !(min_eta > 0.0 && min_eta <= eta)) {
    throw ValidationError("invalid untargeted schedule");
  }
}

const char* attack_mode_name(AttackMode mode) {
  return mode == AttackMode::kTargeted ? "targeted" : "untargeted";
}

AttackMode parse_attack_mode(const std::string& name) {
  if (name == "targeted") return AttackMode::kTargeted;
  if (name == "untargeted") return AttackMode::kUntargeted;
  throw ValidationError("unknown attack mode '" + name + "'");
}

double adversarial_loss(const Prediction& pred, AttackMode mode, int label) {
  if (mode == AttackMode::kUntargeted) return pred.label == label ? pred.confidence : 0.0;
  return pred.label == label ? 1.0 - pred.confidence : 2.0;
}

GradientEstimate nes_gradient(const LossOracle& oracle, std::span<const double> x,
                              const NesConfig& cfg, std::uint64_t stream) {
  cfg.validate();
  const std::size_t dim = x.size();
  const int half = cfg.n / 2;
  SeededRng rng(cfg.seed, stream);
  std::vector<double> deltas(dim * half);
  for (auto& d : deltas) d = rng.normal();

  std::vector<double> plus(half), minus(half);
  std::vector<double> probe(dim);
  GradientEstimate est;
  for (int i = 0; i < half; ++i) {
    const double* d = deltas.data() + std::size_t(i) * dim;
    for (std::size_t k = 0; k < dim; ++k) probe[k] = x[k] + cfg.sigma * d[k];
    plus[i] = oracle(probe);
    ++est.samples_spent;
  }
  for (int i = half - 1; i >= 0; --i) {
    const double* d = deltas.data() + std::size_t(i) * dim;
    for (std::size_t k = 0; k < dim; ++k) probe[k] = x[k] - cfg.sigma * d[k];
    minus[i] = oracle(probe);
    ++est.samples_spent;
  }
  est.grad.assign(dim, 0.0);
  const double scale = 1.0 / (static_cast<double>(cfg.n) * cfg.sigma);
  for (int i = 0; i < half; ++i) {
    const double w = (plus[i] - minus[i]) * scale;
    if (w == 0.0) continue;
    const double* d = deltas.data() + std::size_t(i) * dim;
    for (std::size_t k = 0; k < dim; ++k) est.grad[k] += w * d[k];
  }
  return est;
}

VideoTensor project(const VideoTensor& x, const VideoTensor& center, double eps) {
  if (!x.same_shape(center)) {
    throw ValidationError("project: shape " + x.shape_string() + " vs " + center.shape_string());
  }
  if (!(eps >= 0.0)) throw ValidationError("project: negative radius");
  auto xs = x.data();
  auto cs = center.data();
  std::vector<float> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double c = cs[i];
    auto lo = static_cast<float>(c - eps);
    auto hi = static_cast<float>(c + eps);
    if (static_cast<double>(lo) < c - eps) lo = std::nextafter(lo, 2.0f);
    if (static_cast<double>(hi) > c + eps) hi = std::nextafter(hi, -1.0f);
    lo = std::max(lo, 0.0f);
    hi = std::min(hi, 1.0f);
    out[i] = std::clamp(xs[i], lo, hi);
  }
  return VideoTensor(x.frames(), x.height(), x.width(), x.channels(), std::move(out));
}

VideoTensor to_video(const StyleCandidate& style, int frames) {
  if (frames < 1) throw ValidationError("to_video needs at least one frame");
  if (style.source_video) {
    if (style.source_video->frames() < frames) {
      throw ValidationError("style source '" + style.id + "' has only " +
                            std::to_string(style.source_video->frames()) + " frames, " +
                            std::to_string(frames) + " requested");
    }
    return style.source_video->head(frames);
  }
  return tile_to_video(style.image, frames);
}

namespace {

std::vector<double> to_doubles(const VideoTensor& v) {
  auto d = v.data();
  return {d.begin(), d.end()};
}

VideoTensor from_doubles(std::span<const double> values, const VideoTensor& like) {
  std::vector<float> f(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    f[i] = static_cast<float>(std::clamp(values[i], 0.0, 1.0));
  }
  return VideoTensor(like.frames(), like.height(), like.width(), like.channels(), std::move(f));
}

/// x - eta * sign(g), with sign(0) taken as +1.
VideoTensor sign_step(const VideoTensor& x, const std::vector<double>& g, double eta) {
  auto xs = x.data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] - (g[i] < 0.0 ? -eta : eta);
  return from_doubles(out, x);
}

GradientEstimate estimate(BlackBox& classifier, const VideoTensor& at, AttackMode mode, int label,
                          const NesConfig& nes, std::uint64_t round, double eps,
                          QueryBudget& budget, Transcript* log) {
  const LossOracle oracle = [&](std::span<const double> probe) {
    const Prediction p =
        logged_query(classifier, from_doubles(probe, at), budget, QueryKind::kNes, eps, log);
    return adversarial_loss(p, mode, label);
  };
  const auto x = to_doubles(at);
  return nes_gradient(oracle, x, nes, round);
}

}  // namespace

AttackResult untargeted_attack(BlackBox& classifier, const VideoTensor& stylized, int y0,
                               const NesConfig& nes, double eps_adv, QueryBudget& budget,
                               Transcript* log, const UntargetedSchedule& schedule) {
  nes.validate();
  schedule.validate();
  if (!(eps_adv > 0.0)) throw ValidationError("eps_adv must be positive");
  AttackResult r;
  r.adversarial = stylized;
  r.epsilon = eps_adv;
  r.last = logged_query(classifier, stylized, budget, QueryKind::kProbe, eps_adv, log);
  r.queries = budget.used();
  if (r.last.label != y0) {
    r.success = true;
    return r;
  }
  double eta = schedule.eta;
  std::vector<double> velocity(stylized.size(), 0.0);
  std::deque<double> recent;
  try {
    while (true) {
      const auto g = estimate(classifier, r.adversarial, AttackMode::kUntargeted, y0, nes,
                              r.rounds, eps_adv, budget, log);
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = schedule.momentum * velocity[i] + (1.0 - schedule.momentum) * g.grad[i];
      }
      r.adversarial = project(sign_step(r.adversarial, velocity, eta), stylized, eps_adv);
      ++r.rounds;
      r.last = logged_query(classifier, r.adversarial, budget, QueryKind::kVerify, eps_adv, log);
      if (r.last.label != y0) {
        r.success = true;
        break;
      }
      if (schedule.plateau_rounds > 0) {
        recent.push_back(adversarial_loss(r.last, AttackMode::kUntargeted, y0));
        if (std::ssize(recent) > schedule.plateau_rounds) recent.pop_front();
        if (std::ssize(recent) == schedule.plateau_rounds &&
            recent.back() > *std::min_element(recent.begin(), recent.end() - 1)) {
          eta = std::max(eta / 2.0, schedule.min_eta);
          recent.clear();
        }
      }
    }
  } catch (const BudgetError&) {
    r.success = false;
  }
  r.queries = budget.used();
  return r;
}

AttackResult targeted_attack(BlackBox& classifier, const VideoTensor& stylized,
                             const VideoTensor& x_init, int target, const NesConfig& nes,
                             double eps_adv, QueryBudget& budget, Transcript* log,
                             const BpgdSchedule& schedule) {
  nes.validate();
  schedule.validate();
  if (!(eps_adv > 0.0 && eps_adv <= 1.0)) throw ValidationError("eps_adv must lie in (0,1]");
  if (!x_init.same_shape(stylized)) {
    throw ValidationError("targeted start " + x_init.shape_string() + " does not match " +
                          stylized.shape_string());
  }
  AttackResult r;
  double eps = 1.0;
  r.adversarial = project(x_init, stylized, eps);
  r.epsilon = eps;
  r.last = logged_query(classifier, r.adversarial, budget, QueryKind::kProbe, eps, log);
  r.queries = budget.used();
  if (r.last.label != target) {
    throw PreconditionError("targeted start point is classified as " +
                            std::to_string(r.last.label) + ", not target " +
                            std::to_string(target));
  }

  double eps_step = schedule.eps_step;
  double eta = schedule.eta;
  int streak = 0;
  try {
    while (eps > eps_adv + kEpsTolerance) {
      const auto g = estimate(classifier, r.adversarial, AttackMode::kTargeted, target, nes,
                              r.rounds, eps, budget, log);
      ++r.rounds;
      double next_eps = eps - eps_step;
      if (next_eps < eps_adv + kEpsTolerance) next_eps = eps_adv;

      bool accepted = false;
      double try_eta = eta;
      for (int attempt = 0; attempt <= schedule.max_retries; ++attempt) {
        VideoTensor candidate = project(sign_step(r.adversarial, g.grad, try_eta), stylized, next_eps);
        const Prediction p =
            logged_query(classifier, candidate, budget, QueryKind::kVerify, next_eps, log);
        if (p.label == target) {
          r.adversarial = std::move(candidate);
          r.last = p;
          eps = next_eps;
          eta = try_eta;
          accepted = true;
          break;
        }
        try_eta *= 0.5;
      }
      if (accepted) {
        if (++streak >= schedule.accepts_before_growth) {
          eta = std::min(eta * schedule.eta_growth, schedule.eta_max);
          streak = 0;
        }
      } else {
        eps_step = std::max(eps_step * 0.5, schedule.min_eps_step);
        streak = 0;
      }
    }
    r.success = true;
  } catch (const BudgetError&) {
    r.success = false;
  }
  r.epsilon = eps;
  r.queries = budget.used();
  return r;
}

}  // namespace stylefool
