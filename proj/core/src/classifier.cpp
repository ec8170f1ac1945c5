#include "stylefool/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "binary_io.hpp"
#include "stylefool/error.hpp"

namespace stylefool {

QueryBudget::QueryBudget(std::uint64_t limit, std::uint64_t used) : limit_(limit), used_(used) {
  if (used > limit) throw ValidationError("query budget starts above its limit");
}

std::uint64_t QueryBudget::used() const {
  std::lock_guard lock(mu_);
  return used_;
}

std::uint64_t QueryBudget::remaining() const {
  std::lock_guard lock(mu_);
  return limit_ - used_;
}

bool QueryBudget::try_acquire() {
  std::lock_guard lock(mu_);
  if (used_ >= limit_) return false;
  ++used_;
  return true;
}

void QueryBudget::release() {
  std::lock_guard lock(mu_);
  if (used_ > 0) --used_;
}

Prediction query(BlackBox& classifier, const VideoTensor& video, QueryBudget& budget) {
  if (!budget.try_acquire()) {
    throw BudgetError("query budget of " + std::to_string(budget.limit()) + " exhausted",
                      budget.used());
  }
  // Only answered queries count; a rejected input or a dead channel gives the slot back.
  try {
    return classifier.classify(video);
  } catch (...) {
    budget.release();
    throw;
  }
}

const char* motion_class_name(int label) {
  static constexpr const char* kNames[] = {"left", "right", "up", "down", "rotate"};
  return label >= 0 && label < kToyClasses ? kNames[label] : "unknown";
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

constexpr int kSynthFrames = 16;
constexpr int kSynthSize = 32;

std::array<double, 3> hsv_color(double h, double s, double v) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hp) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  for (auto& ch : rgb) ch += v - c;
  return rgb;
}

enum class Shape { kSquare, kDisc, kBar };

/// Coverage of pixel centre (px,py) by a shape centred at (cx,cy).
bool covers(Shape shape, double cx, double cy, double angle, double px, double py) {
  const double dx = px - cx, dy = py - cy;
  switch (shape) {
    case Shape::kSquare:
      return std::abs(dx) <= 4.0 && std::abs(dy) <= 4.0;
    case Shape::kDisc:
      return dx * dx + dy * dy <= 4.5 * 4.5;
    case Shape::kBar: {
      const double u = dx * std::cos(angle) + dy * std::sin(angle);
      const double v = -dx * std::sin(angle) + dy * std::cos(angle);
      return std::abs(u) <= 6.5 && std::abs(v) <= 1.6;
    }
  }
  return false;
}

VideoTensor render_clip(SeededRng& rng, int label) {
  const int n = kSynthSize;
  // Static textured background around a muted base colour.
  std::array<double, 3> base{};
  for (auto& b : base) b = rng.uniform(0.2, 0.6);
  std::vector<double> background(std::size_t(n) * n * 3);
  for (std::size_t i = 0; i < background.size(); ++i) {
    background[i] = std::clamp(base[i % 3] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
  }
  const auto color = hsv_color(rng.uniform(0.0, 360.0), rng.uniform(0.7, 1.0), rng.uniform(0.85, 1.0));

  Shape shape;
  double cx, cy, vx = 0, vy = 0, angle = 0, spin = 0;
  const double travel = kSynthFrames - 1;  // one pixel per frame
  if (label == static_cast<int>(MotionClass::kRotate)) {
    shape = Shape::kBar;
    cx = rng.uniform(10.0, 22.0);
    cy = rng.uniform(10.0, 22.0);
    angle = rng.uniform(0.0, std::numbers::pi);
    spin = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::numbers::pi / 15.0;
  } else {
    shape = rng.uniform() < 0.5 ? Shape::kSquare : Shape::kDisc;
    const double along_lo = 5.0, along_hi = n - 5.0 - travel;
    const double across = std::round(rng.uniform(6.0, n - 7.0));
    const double start = std::round(rng.uniform(along_lo, along_hi));
    switch (static_cast<MotionClass>(label)) {
      case MotionClass::kLeft: cx = n - 1 - start; cy = across; vx = -1; break;
      case MotionClass::kRight: cx = start; cy = across; vx = 1; break;
      case MotionClass::kUp: cx = across; cy = n - 1 - start; vy = -1; break;
      default: cx = across; cy = start; vy = 1; break;
    }
  }

  std::vector<float> data(std::size_t(kSynthFrames) * n * n * 3);
  for (int t = 0; t < kSynthFrames; ++t) {
    const double fx = cx + vx * t, fy = cy + vy * t, fa = angle + spin * t;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const bool in = covers(shape, fx, fy, fa, x, y);
        for (int c = 0; c < 3; ++c) {
          const std::size_t bi = (std::size_t(y) * n + x) * 3 + c;
          data[std::size_t(t) * n * n * 3 + bi] =
              static_cast<float>(in ? color[c] : background[bi]);
        }
      }
    }
  }
  return VideoTensor(kSynthFrames, n, n, 3, std::move(data));
}

}  // namespace

std::vector<LabeledVideo> synth_dataset(SeededRng& rng, int per_class, const std::string& id_prefix) {
  if (per_class < 1) throw ValidationError("synth_dataset needs per_class >= 1");
  std::vector<LabeledVideo> out;
  out.reserve(std::size_t(per_class) * kToyClasses);
  char buf[16];
  for (int k = 0; k < per_class; ++k) {
    for (int label = 0; label < kToyClasses; ++label) {
      std::snprintf(buf, sizeof buf, "%04zu", out.size());
      out.push_back({id_prefix + buf, label, render_clip(rng, label)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Toy classifier

namespace {

using Grid = nn::Grid<double>;

/// Activations of one frame pair, kept for backpropagation.
struct PairTrace {
  std::vector<Grid> block_in;    // input of each conv
  std::vector<Grid> relu_out;    // relu output of each block
  Grid pooled;                   // output of the last block
};

Grid pair_input(const VideoTensor& v, int t) {
  const int h = v.height(), w = v.width(), c = v.channels();
  Grid g(h, w, 2 * c);
  auto a = v.frame_data(t);
  auto b = v.frame_data(t + 1);
  for (std::size_t p = 0; p < std::size_t(h) * w; ++p) {
    for (int k = 0; k < c; ++k) {
      g.data[p * 2 * c + k] = double(a[p * c + k]) - 0.5;
      g.data[p * 2 * c + c + k] = double(b[p * c + k]) - double(a[p * c + k]);
    }
  }
  return nn::avgpool2_forward(g);
}

PairTrace forward_pair(const ToyClassifier::Params& p, Grid x) {
  PairTrace tr;
  for (const auto& conv : p.convs) {
    tr.block_in.push_back(std::move(x));
    tr.relu_out.push_back(nn::relu_forward(nn::conv3x3_forward(tr.block_in.back(), conv)));
    x = nn::avgpool2_forward(tr.relu_out.back());
  }
  tr.pooled = std::move(x);
  return tr;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] = std::exp(logits[i] - mx);
  for (auto& v : p) v /= sum;
  return p;
}

/// Mean flattened feature over all frame pairs; optionally keeps traces.
std::vector<double> clip_features(const ToyClassifier::Params& p, const VideoTensor& v,
                                  std::vector<PairTrace>* traces) {
  if (v.frames() < 2) throw ValidationError("toy classifier needs at least two frames");
  if (v.channels() * 2 != (p.convs.empty() ? 0 : p.convs.front().in_channels)) {
    throw ValidationError("toy classifier channel mismatch");
  }
  std::vector<double> feat(p.dense_in, 0.0);
  const int pairs = v.frames() - 1;
  for (int t = 0; t < pairs; ++t) {
    auto tr = forward_pair(p, pair_input(v, t));
    if (static_cast<int>(tr.pooled.size()) != p.dense_in) {
      throw ValidationError("toy classifier input size mismatch: clip is " + v.shape_string());
    }
    for (int i = 0; i < p.dense_in; ++i) feat[i] += tr.pooled.data[i];
    if (traces) traces->push_back(std::move(tr));
  }
  for (auto& f : feat) f /= pairs;
  return feat;
}

std::vector<double> logits_of(const ToyClassifier::Params& p, const std::vector<double>& feat) {
  std::vector<double> z(p.classes);
  for (int k = 0; k < p.classes; ++k) {
    double s = p.dense_bias[k];
    for (int i = 0; i < p.dense_in; ++i) s += p.dense_weights[std::size_t(k) * p.dense_in + i] * feat[i];
    z[k] = s;
  }
  return z;
}

}  // namespace

ToyClassifier::ToyClassifier(Params params) : params_(std::move(params)) {
  if (params_.convs.empty()) throw ValidationError("toy classifier needs conv layers");
  for (std::size_t i = 1; i < params_.convs.size(); ++i) {
    if (params_.convs[i].in_channels != params_.convs[i - 1].out_channels) {
      throw ValidationError("toy classifier conv channels do not chain");
    }
  }
  if (params_.dense_weights.size() != std::size_t(params_.classes) * params_.dense_in ||
      params_.dense_bias.size() != std::size_t(params_.classes)) {
    throw ValidationError("toy classifier dense layer has inconsistent sizes");
  }
}

ToyClassifier ToyClassifier::initialize(SeededRng& rng, int height, int width) {
  Params p;
  const int widths[] = {6, 12, 16, 16};
  for (int i = 0; i < 3; ++i) {
    nn::Conv3x3<double> conv(widths[i], widths[i + 1]);
    const double scale = std::sqrt(2.0 / (9.0 * widths[i]));
    for (auto& w : conv.weights) w = scale * rng.normal();
    p.convs.push_back(std::move(conv));
  }
  // Input is downsampled once, then halved by each block.
  p.dense_in = (height / 2 / 8) * (width / 2 / 8) * widths[3];
  p.classes = kToyClasses;
  p.dense_weights.resize(std::size_t(p.classes) * p.dense_in);
  const double scale = std::sqrt(1.0 / p.dense_in);
  for (auto& w : p.dense_weights) w = scale * rng.normal();
  p.dense_bias.assign(p.classes, 0.0);
  return ToyClassifier(std::move(p));
}

std::vector<double> ToyClassifier::probabilities(const VideoTensor& video) const {
  return softmax(logits_of(params_, clip_features(params_, video, nullptr)));
}

Prediction ToyClassifier::classify(const VideoTensor& video) {
  const auto p = probabilities(video);
  const auto it = std::max_element(p.begin(), p.end());
  return {static_cast<int>(it - p.begin()), *it};
}

double accuracy(const ToyClassifier& model, const std::vector<LabeledVideo>& data) {
  if (data.empty()) return 0.0;
  int correct = 0;
  for (const auto& d : data) {
    const auto p = model.probabilities(d.video);
    if (std::max_element(p.begin(), p.end()) - p.begin() == d.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

/// Flat views over every trainable array, in a fixed order.
std::vector<std::span<double>> parameter_views(ToyClassifier::Params& p) {
  std::vector<std::span<double>> v;
  for (auto& c : p.convs) {
    v.emplace_back(c.weights);
    v.emplace_back(c.bias);
  }
  v.emplace_back(p.dense_weights);
  v.emplace_back(p.dense_bias);
  return v;
}

ToyClassifier::Params zeros_like(const ToyClassifier::Params& p) {
  ToyClassifier::Params z;
  for (const auto& c : p.convs) z.convs.emplace_back(c.in_channels, c.out_channels);
  z.dense_in = p.dense_in;
  z.classes = p.classes;
  z.dense_weights.assign(p.dense_weights.size(), 0.0);
  z.dense_bias.assign(p.dense_bias.size(), 0.0);
  return z;
}

/// Adds d(cross-entropy)/d(params) for one clip into `grad`; returns the loss.
double accumulate_gradient(const ToyClassifier::Params& p, const LabeledVideo& sample,
                           ToyClassifier::Params& grad) {
  std::vector<PairTrace> traces;
  const auto feat = clip_features(p, sample.video, &traces);
  const auto prob = softmax(logits_of(p, feat));
  std::vector<double> dz(prob);
  dz[sample.label] -= 1.0;

  std::vector<double> dfeat(p.dense_in, 0.0);
  for (int k = 0; k < p.classes; ++k) {
    grad.dense_bias[k] += dz[k];
    for (int i = 0; i < p.dense_in; ++i) {
      grad.dense_weights[std::size_t(k) * p.dense_in + i] += dz[k] * feat[i];
      dfeat[i] += dz[k] * p.dense_weights[std::size_t(k) * p.dense_in + i];
    }
  }
  const double inv_pairs = 1.0 / static_cast<double>(traces.size());
  for (auto& tr : traces) {
    Grid g(tr.pooled.height, tr.pooled.width, tr.pooled.channels);
    for (int i = 0; i < p.dense_in; ++i) g.data[i] = dfeat[i] * inv_pairs;
    for (int b = static_cast<int>(p.convs.size()) - 1; b >= 0; --b) {
      g = nn::avgpool2_backward(g, tr.relu_out[b].height, tr.relu_out[b].width);
      g = nn::relu_backward(tr.relu_out[b], std::move(g));
      nn::conv3x3_backward_params(tr.block_in[b], g, grad.convs[b]);
      if (b > 0) g = nn::conv3x3_backward_input(g, p.convs[b]);
    }
  }
  return -std::log(std::max(prob[sample.label], 1e-300));
}

ToyClassifier train_once(const std::vector<LabeledVideo>& train, SeededRng& rng,
                         const TrainOptions& opt) {
  const int h = train.front().video.height(), w = train.front().video.width();
  ToyClassifier model = ToyClassifier::initialize(rng, h, w);
  auto& params = model.mutable_params();
  const auto views = parameter_views(params);
  std::vector<std::vector<double>> m1, m2;
  for (const auto& v : views) {
    m1.emplace_back(v.size(), 0.0);
    m2.emplace_back(v.size(), 0.0);
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double bias1 = 1.0, bias2 = 1.0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto order = rng.permutation(train.size());
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      auto grad = zeros_like(params);
      for (std::size_t i = start; i < end; ++i) accumulate_gradient(params, train[order[i]], grad);
      const double inv = 1.0 / static_cast<double>(end - start);
      bias1 *= kBeta1;
      bias2 *= kBeta2;
      const double lr = opt.learning_rate * std::sqrt(1.0 - bias2) / (1.0 - bias1);
      const auto gviews = parameter_views(grad);
      for (std::size_t k = 0; k < views.size(); ++k) {
        for (std::size_t i = 0; i < views[k].size(); ++i) {
          const double g = gviews[k][i] * inv;
          m1[k][i] = kBeta1 * m1[k][i] + (1 - kBeta1) * g;
          m2[k][i] = kBeta2 * m2[k][i] + (1 - kBeta2) * g * g;
          views[k][i] -= lr * m1[k][i] / (std::sqrt(m2[k][i]) + kEps);
        }
      }
    }
  }
  return model;
}

}  // namespace

TrainReport train_toy(const std::vector<LabeledVideo>& train, const std::vector<LabeledVideo>& test,
                      SeededRng& rng, const TrainOptions& options) {
  if (train.empty()) throw ValidationError("training set is empty");
  std::vector<int> counts(kToyClasses, 0);
  for (const auto& s : train) {
    if (s.label < 0 || s.label >= kToyClasses) throw ValidationError("label out of range");
    ++counts[s.label];
  }
  if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) != counts.end()) {
    throw ValidationError("training set is not balanced across classes");
  }
  double best = -1.0;
  for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
    SeededRng attempt_rng(rng.seed(), rng.stream() + static_cast<std::uint64_t>(attempt) * 0x9E37u);
    ToyClassifier model = train_once(train, attempt_rng, options);
    const double acc = test.empty() ? accuracy(model, train) : accuracy(model, test);
    best = std::max(best, acc);
    if (acc >= options.min_accuracy) return {std::move(model), acc, attempt};
  }
  throw TrainingError("toy classifier reached only " + std::to_string(best) +
                      " held-out accuracy after " + std::to_string(options.max_attempts) +
                      " attempts");
}

void save_toy(const ToyClassifier& model, const std::filesystem::path& path) {
  const auto& p = model.params();
  detail::BinaryWriter out(path.string());
  out.magic("TCW1");
  out.u32(static_cast<std::uint32_t>(p.classes));
  out.u32(static_cast<std::uint32_t>(p.convs.size()));
  for (const auto& c : p.convs) {
    out.u32(static_cast<std::uint32_t>(c.in_channels));
    out.u32(static_cast<std::uint32_t>(c.out_channels));
    out.f64s(c.weights);
    out.f64s(c.bias);
  }
  out.u32(static_cast<std::uint32_t>(p.dense_in));
  out.f64s(p.dense_weights);
  out.f64s(p.dense_bias);
  out.finish();
}

ToyClassifier load_toy(const std::filesystem::path& path) {
  detail::BinaryReader in(path.string());
  in.expect_magic("TCW1");
  ToyClassifier::Params p;
  p.classes = static_cast<int>(in.u32());
  const std::uint32_t convs = in.u32();
  if (p.classes < 2 || p.classes > 4096 || convs == 0 || convs > 64) {
    throw FormatError("'" + path.string() + "': implausible classifier header");
  }
  for (std::uint32_t i = 0; i < convs; ++i) {
    const int cin = static_cast<int>(in.u32());
    const int cout = static_cast<int>(in.u32());
    if (cin < 1 || cout < 1 || cin > 4096 || cout > 4096) {
      throw FormatError("'" + path.string() + "': implausible conv shape");
    }
    nn::Conv3x3<double> c(cin, cout);
    in.f64s(c.weights);
    in.f64s(c.bias);
    p.convs.push_back(std::move(c));
  }
  p.dense_in = static_cast<int>(in.u32());
  if (p.dense_in < 1 || p.dense_in > (1 << 24)) {
    throw FormatError("'" + path.string() + "': implausible dense shape");
  }
  p.dense_weights.resize(std::size_t(p.classes) * p.dense_in);
  p.dense_bias.resize(p.classes);
  in.f64s(p.dense_weights);
  in.f64s(p.dense_bias);
  if (in.remaining() != 0) throw FormatError("'" + path.string() + "': trailing bytes");
  try {
    return ToyClassifier(std::move(p));
  } catch (const ValidationError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace stylefool
