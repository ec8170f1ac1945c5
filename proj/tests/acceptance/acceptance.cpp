// Acceptance suite: one PASS/FAIL line per top-level property, using the
// shipped weights, toy model and toy clip/style pair under the assets directory.
// Exit status is nonzero when any line fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stylefool/blackbox_attack.hpp"
#include "stylefool/classifier.hpp"
#include "stylefool/color_themes.hpp"
#include "stylefool/config.hpp"
#include "stylefool/feature_net.hpp"
#include "stylefool/metrics.hpp"
#include "stylefool/pipeline.hpp"
#include "stylefool/style_selection.hpp"
#include "stylefool/style_transfer.hpp"
#include "stylefool/transcript.hpp"
#include "stylefool/video_io.hpp"

namespace fs = std::filesystem;
using namespace stylefool;

namespace {

struct Context {
  fs::path assets;
  fs::path work;
  bool verbose = false;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

void note(const Context& ctx, const std::string& line) {
  if (ctx.verbose) std::cerr << "    " << line << std::endl;
}

// ---------------------------------------------------------------------------
// Gradient correctness

nn::Grid<double> unit_grid(SeededRng& rng, int h, int w) {
  nn::Grid<double> g(h, w, 3);
  for (auto& v : g.data) v = rng.uniform(0.05, 0.95);
  return g;
}

double max_relative_error(const std::function<double(const nn::Grid<double>&)>& f,
                          const nn::Grid<double>& x, const nn::Grid<double>& analytic,
                          double step) {
  double worst = 0.0;
  nn::Grid<double> probe = x;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    probe.data[i] = x.data[i] + step;
    const double up = f(probe);
    probe.data[i] = x.data[i] - step;
    const double down = f(probe);
    probe.data[i] = x.data[i];
    const double fd = (up - down) / (2 * step);
    const double a = analytic.data[i];
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(a - fd) / denom);
  }
  return worst;
}

Outcome gradient_check(const Context& ctx) {
  Timer timer;
  const auto net = load_weights(ctx.assets / "feature_net.fwf").cast<double>();
  // 8x8 inputs leave no spatial extent after the fourth pooling stage.
  FeatureTaps taps;
  taps.content = {"relu3_1", "relu4_2"};
  taps.style = {"relu1_1", "relu2_1", "relu3_1", "relu4_1"};
  // Larger steps straddle relu kinks in the feature net.
  constexpr double kFeatureStep = 1e-5;
  constexpr double kQuadraticStep = 1e-3;

  double content = 0, style = 0, tv = 0, temporal = 0;
  for (int s = 0; s < 20; ++s) {
    SeededRng rng(2024, s);
    auto x = unit_grid(rng, 8, 8), xs = unit_grid(rng, 8, 8), sty = unit_grid(rng, 8, 8);
    auto prev = unit_grid(rng, 8, 8);
    FlowField flow(8, 8);
    for (auto& d : flow.displacement) d = static_cast<float>(rng.uniform(-1.5, 1.5));
    for (auto& m : flow.mask) m = rng.uniform() < 0.7 ? 1.0f : 0.0f;

    const auto c = content_loss(x, xs, net, taps);
    content = std::max(content, max_relative_error(
        [&](const nn::Grid<double>& p) { return content_loss(x, p, net, taps).value; }, xs, c.grad,
        kFeatureStep));
    const auto st = style_loss(xs, sty, net, taps);
    style = std::max(style, max_relative_error(
        [&](const nn::Grid<double>& p) { return style_loss(p, sty, net, taps).value; }, xs,
        st.grad, kFeatureStep));
    const auto t = tv_loss(xs);
    tv = std::max(tv, max_relative_error([](const nn::Grid<double>& p) { return tv_loss(p).value; },
                                         xs, t.grad, kQuadraticStep));
    const auto tp = temporal_loss(prev, xs, flow);
    temporal = std::max(
        temporal, max_relative_error(
                      [&](const nn::Grid<double>& p) { return temporal_loss(p, xs, flow).value; },
                      prev, tp.grad_prev, kQuadraticStep));
    temporal = std::max(
        temporal, max_relative_error(
                      [&](const nn::Grid<double>& n) { return temporal_loss(prev, n, flow).value; },
                      xs, tp.grad_next, kQuadraticStep));
  }
  const double secs = timer.seconds();
  const double worst = std::max({content, style, tv, temporal});
  return {worst <= 1e-3 && secs < 60.0,
          fmt("max rel err content %.2e style %.2e tv %.2e temporal %.2e over 20 seeds, %.1f s",
              content, style, tv, temporal, secs)};
}

// ---------------------------------------------------------------------------
// NES estimator

Outcome nes_check(const Context&) {
  Timer timer;
  constexpr int kDim = 64;
  NesConfig cfg;
  cfg.n = 64;
  cfg.sigma = 1e-3;

  std::vector<double> x(kDim);
  SeededRng xr(77);
  for (auto& v : x) v = xr.uniform();

  bool constant_zero = true;
  for (int s = 0; s < 10; ++s) {
    cfg.seed = 500 + s;
    const auto est = nes_gradient([](std::span<const double>) { return 0.42; }, x, cfg);
    for (double g : est.grad) constant_zero = constant_zero && g == 0.0;
  }

  std::vector<double> truth(kDim);
  SeededRng gr(78);
  for (auto& v : truth) v = gr.normal();
  const auto linear = [&](std::span<const double> p) {
    double acc = 0.0;
    for (int i = 0; i < kDim; ++i) acc += truth[i] * p[i];
    return acc;
  };
  std::vector<double> mean(kDim, 0.0);
  for (int s = 0; s < 100; ++s) {
    cfg.seed = 1000 + s;
    const auto est = nes_gradient(linear, x, cfg);
    for (int i = 0; i < kDim; ++i) mean[i] += est.grad[i] / 100.0;
  }
  double dot = 0, nm = 0, nt = 0;
  for (int i = 0; i < kDim; ++i) {
    dot += mean[i] * truth[i];
    nm += mean[i] * mean[i];
    nt += truth[i] * truth[i];
  }
  const double cosine = dot / std::sqrt(nm * nt);
  const double secs = timer.seconds();
  return {constant_zero && cosine >= 0.9 && secs < 30.0,
          fmt("constant oracle exact zero: %s; linear cosine %.4f (n=64, dim=64, 100 seeds), %.2f s",
              constant_zero ? "yes" : "no", cosine, secs)};
}

// ---------------------------------------------------------------------------
// Colour themes and selection

// Straightforward replay of the split rule used as an independent oracle.
std::vector<Rgb> oracle_median_cut(const std::vector<Rgb>& pixels, int m) {
  std::vector<std::vector<Rgb>> buckets{pixels};
  auto widest = [](const std::vector<Rgb>& b, int& channel) {
    double best = -1.0;
    for (int c = 0; c < 3; ++c) {
      double lo = b[0][c], hi = b[0][c];
      for (const auto& p : b) {
        lo = std::min(lo, p[c]);
        hi = std::max(hi, p[c]);
      }
      if (hi - lo > best) {
        best = hi - lo;
        channel = c;
      }
    }
    return best;
  };
  auto split = [&](const std::vector<Rgb>& b) {
    int c = 0;
    widest(b, c);
    auto sorted = b;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [c](const Rgb& p, const Rgb& q) { return p[c] < q[c]; });
    const auto half = sorted.begin() + static_cast<long>(sorted.size() / 2);
    return std::pair{std::vector<Rgb>(sorted.begin(), half), std::vector<Rgb>(half, sorted.end())};
  };
  int levels = 0;
  while ((2 << levels) <= m) ++levels;
  for (int l = 0; l < levels; ++l) {
    std::vector<std::vector<Rgb>> next;
    for (const auto& b : buckets) {
      auto [lo, hi] = split(b);
      next.push_back(std::move(lo));
      next.push_back(std::move(hi));
    }
    buckets = std::move(next);
  }
  while (static_cast<int>(buckets.size()) < m) {
    std::size_t pick = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      int c = 0;
      const double r = widest(buckets[i], c);
      if (r > best) {
        best = r;
        pick = i;
      }
    }
    auto [lo, hi] = split(buckets[pick]);
    buckets[pick] = std::move(hi);
    buckets.insert(buckets.begin() + static_cast<long>(pick), std::move(lo));
  }
  std::vector<Rgb> out;
  for (const auto& b : buckets) {
    Rgb med{};
    for (int c = 0; c < 3; ++c) {
      std::vector<double> v;
      for (const auto& p : b) v.push_back(p[c]);
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      med[c] = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
    out.push_back(med);
  }
  return out;
}

ImageTensor image_of(const std::vector<Rgb>& pixels, int h, int w) {
  std::vector<float> data;
  for (const auto& p : pixels) {
    for (double c : p) data.push_back(static_cast<float>(c));
  }
  return ImageTensor(h, w, 3, std::move(data));
}

std::vector<Rgb> pixels_of(const ImageTensor& img) {
  std::vector<Rgb> px;
  auto d = img.data();
  for (std::size_t i = 0; i < d.size(); i += 3) px.push_back({d[i], d[i + 1], d[i + 2]});
  return px;
}

bool same_colors(const std::vector<Rgb>& a, const std::vector<Rgb>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      if (std::abs(a[i][c] - b[i][c]) > tol) return false;
    }
  }
  return true;
}

ThemeSet themes_at(const std::vector<Xyz>& points) {
  ThemeSet t;
  for (const auto& p : points) {
    ColorTheme th;
    th.xyz = p;
    t.themes.push_back(th);
  }
  return t;
}

Outcome color_check(const Context&) {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Median cut on the documented instances, each against the oracle and by hand.
  {
    std::vector<Rgb> gray(16, Rgb{0.5, 0.5, 0.5});
    auto img = image_of(gray, 4, 4);
    expect(same_colors(median_cut(img, 1), {{0.5, 0.5, 0.5}}, 0.0), "uniform m=1");
    expect(same_colors(median_cut(img, 1), oracle_median_cut(pixels_of(img), 1), 0.0),
           "uniform oracle");
  }
  {
    auto img = image_of({{0, 0, 0}, {0.1, 0, 0}, {0.9, 0, 0}, {1, 0, 0}}, 2, 2);
    expect(same_colors(median_cut(img, 2), {{0.05, 0, 0}, {0.95, 0, 0}}, 1e-7), "four-pixel m=2");
    expect(same_colors(median_cut(img, 2), oracle_median_cut(pixels_of(img), 2), 0.0),
           "four-pixel oracle");
  }
  {
    std::vector<Rgb> ramp;
    for (int i = 0; i < 8; ++i) {
      const double v = static_cast<float>(i / 7.0);
      ramp.push_back({v, v, v});
    }
    auto img = image_of(ramp, 2, 4);
    expect(same_colors(median_cut(img, 3), oracle_median_cut(pixels_of(img), 3), 0.0),
           "ramp m=3 oracle");
  }
  for (int s = 0; s < 20; ++s) {
    SeededRng rng(3030, s);
    std::vector<Rgb> px(6 * 5);
    for (auto& p : px) p = {rng.uniform(), rng.uniform(), rng.uniform()};
    auto img = image_of(pixels_of(image_of(px, 6, 5)), 6, 5);
    for (int m = 1; m <= 7; ++m) {
      if (!same_colors(median_cut(img, m), oracle_median_cut(pixels_of(img), m), 0.0)) {
        expect(false, fmt("random 6x5 seed %d m=%d oracle", s, m));
      }
    }
  }

  // Cone embedding.
  const ConeGeometry cone;
  for (double h : {0.0, 45.0, 123.4, 359.9}) {
    const auto apex = hsv_to_xyz({h, 0.0, 1.0}, cone);
    expect(std::abs(apex[0]) <= 1e-9 && std::abs(apex[1]) <= 1e-9 && std::abs(apex[2]) <= 1e-9,
           fmt("S=0,V=1 at H=%g", h));
    for (double sat : {0.0, 0.3, 1.0}) {
      const auto tip = hsv_to_xyz({h, sat, 0.0}, cone);
      expect(std::abs(tip[0]) <= 1e-9 && std::abs(tip[1]) <= 1e-9 &&
                 std::abs(tip[2] - 50.0 * std::sqrt(3.0)) <= 1e-9,
             fmt("V=0 at H=%g S=%g", h, sat));
    }
  }
  const auto red = hsv_to_xyz({0.0, 1.0, 1.0}, cone);
  expect(std::abs(red[0] - 50.0) <= 1e-9 && std::abs(red[1]) <= 1e-9 && std::abs(red[2]) <= 1e-9,
         "H=0,S=1,V=1");

  // Proximity against a direct double sum.
  expect(color_proximity(themes_at({{1, 2, 3}, {1, 2, 3}}), themes_at({{1, 2, 3}, {1, 2, 3}})) == 0.0,
         "proximity zero");
  expect(std::abs(color_proximity(themes_at({{0, 0, 0}}), themes_at({{3, 4, 0}})) - 5.0) <= 1e-12,
         "proximity 5");
  expect(std::abs(color_proximity(themes_at({{1, 1, 1}, {1, 1, 1}}),
                                  themes_at({{4, 5, 1}, {4, 5, 1}})) - 20.0) <= 1e-12,
         "proximity 4d");
  for (int s = 0; s < 20; ++s) {
    SeededRng rng(3131, s);
    std::vector<Xyz> a(3), b(3);
    for (auto& p : a) p = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 86)};
    for (auto& p : b) p = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 86)};
    double brute = 0.0;
    for (const auto& p : a) {
      for (const auto& q : b) {
        brute += std::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) +
                           (p[2] - q[2]) * (p[2] - q[2]));
      }
    }
    const double got = color_proximity(themes_at(a), themes_at(b));
    expect(std::abs(got - brute) <= 1e-9 * brute, fmt("proximity brute force seed %d", s));
  }

  // Selection: the all-pairs proximity is zero only when every theme of both
  // sides coincides, so the clip and the matching candidate are flat colours.
  auto flat = [](float r, float g, float b) {
    std::vector<float> px;
    for (int i = 0; i < 32 * 32; ++i) px.insert(px.end(), {r, g, b});
    return ImageTensor(32, 32, 3, std::move(px));
  };
  const auto clip = tile_to_video(flat(0.3f, 0.6f, 0.2f), kClipFrames);
  std::vector<StyleCandidate> styles;
  SeededRng srng(3232);
  for (int i = 0; i < 6; ++i) {
    const auto r = static_cast<float>(srng.uniform()), g = static_cast<float>(srng.uniform()),
               b = static_cast<float>(srng.uniform());
    styles.push_back(make_candidate("far" + std::to_string(i), flat(r, g, b)));
  }
  styles.insert(styles.begin() + 4, make_candidate("match", flat(0.3f, 0.6f, 0.2f)));
  const auto chosen = select_style(clip, styles, SelectionOptions{});
  expect(styles[chosen.index].id == "match" && chosen.criterion.proximity == 0.0 &&
             chosen.probes == 0,
         fmt("selection picked %s at proximity %g with %llu probes", styles[chosen.index].id.c_str(),
             chosen.criterion.proximity, static_cast<unsigned long long>(chosen.probes)));

  std::string detail =
      "median cut oracle on documented and 140 random instances; cone apex/tip exact to 1e-9; "
      "proximity brute force; selection picked '" + styles[chosen.index].id + "' at proximity " +
      fmt("%g", chosen.criterion.proximity);
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// Style transfer

Outcome transfer_check(const Context& ctx) {
  Timer timer;
  const auto net = load_weights(ctx.assets / "feature_net.fwf");
  const auto video = read_vtf(ctx.assets / "toy_video.vtf");
  const auto style = read_vtf(ctx.assets / "toy_style.vtf").frame(0);

  TransferConfig cfg;
  const auto shipped = transfer(video, style, net, cfg);
  const double initial = shipped.trace.front().total;
  const double final_total = shipped.trace.back().total;
  const double ratio = final_total / initial;
  note(ctx, fmt("toy pair: total %.5g -> %.5g (ratio %.4f)", initial, final_total, ratio));

  // Temporal term with and without the temporal weight on five toy clips.
  SeededRng rng(7, 1);
  const auto clips = synth_dataset(rng, 1, "pair");
  double with_temporal = 0.0, per_frame = 0.0;
  for (const auto& c : clips) {
    const auto flows = clip_flows(c.video);
    TransferConfig on = cfg, off = cfg;
    off.lambda = 0.0;
    const auto a = transfer(c.video, style, net, on, flows);
    const auto b = transfer(c.video, style, net, off, flows);
    const double ta = a.trace.back().temporal;
    const double tb = evaluate_transfer_loss(c.video, b.stylized, style, net, on, flows).temporal;
    note(ctx, fmt("%s: temporal %.5g (lambda=1e3) vs %.5g (lambda=0)", c.id.c_str(), ta, tb));
    with_temporal += ta / static_cast<double>(clips.size());
    per_frame += tb / static_cast<double>(clips.size());
  }
  const double secs = timer.seconds();
  return {ratio <= 0.1 && with_temporal <= per_frame && secs < 600.0,
          fmt("toy pair final/initial %.4f after %d iterations; mean temporal %.4g with lambda=1e3 "
              "vs %.4g with lambda=0 over %zu clips; %.0f s",
              ratio, cfg.iterations, with_temporal, per_frame, clips.size(), secs)};
}

// ---------------------------------------------------------------------------
// End-to-end runs on the toy corpus

struct World {
  std::vector<LabeledVideo> victims;
  std::vector<StyleCandidate> styles;
  ToyClassifier model;
  FeatureNet net;
};

// Same corpus, split and model as scripts/make_assets.sh.
World make_world(const Context& ctx) {
  World w;
  SeededRng crng(11, 4);
  const auto corpus = synth_dataset(crng, 8, "clip");
  SeededRng split_rng(12);
  const auto split = split_corpus(corpus.size(), 0.5, split_rng);
  SeededRng style_rng(12);
  w.styles = build_style_set(corpus, 0.5, style_rng);
  for (auto i : split.rest) w.victims.push_back(corpus[i]);
  w.model = load_toy(ctx.assets / "toy_model.tcw");
  w.net = load_weights(ctx.assets / "feature_net.fwf");
  return w;
}

struct E2eRun {
  PipelineReport report;
  fs::path dir;
  double seconds = 0.0;
};

E2eRun run_mode(const Context& ctx, World& w, AttackMode mode, const std::string& name) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.output = ctx.work / name;
  fs::remove_all(cfg.output);
  Timer timer;
  std::ostringstream log;
  E2eRun run;
  run.report = run_pipeline(cfg, w.victims, w.model, w.net, w.styles, ctx.verbose ? &std::cerr : &log);
  run.dir = cfg.output;
  run.seconds = timer.seconds();
  return run;
}

Outcome boundary_check(const Context& ctx, World& w, const E2eRun& run) {
  double clean = 0.0, stylized = 0.0;
  int flipped = 0, counted = 0;
  for (std::size_t i = 0; i < run.report.videos.size(); ++i) {
    const auto& v = run.report.videos[i];
    if (!v.error.empty()) continue;
    const auto styl = read_vtf(run.dir / "videos" / v.video_id / "stylized.vtf");
    const double pc = w.model.probabilities(w.victims[i].video)[v.label];
    const double ps = w.model.probabilities(styl)[v.label];
    note(ctx, fmt("%s: p(label) %.4f -> %.4f", v.video_id.c_str(), pc, ps));
    clean += pc;
    stylized += ps;
    if (w.model.classify(styl).label != v.label) ++flipped;
    ++counted;
  }
  const bool all = counted == static_cast<int>(w.victims.size());
  clean /= std::max(counted, 1);
  stylized /= std::max(counted, 1);
  return {all && stylized < clean,
          fmt("mean true-class confidence %.4f clean -> %.4f stylized over %d clips; "
              "misclassified by stylization alone: %d/%d (%.0f%%)",
              clean, stylized, counted, flipped, counted, 100.0 * flipped / std::max(counted, 1))};
}

Outcome untargeted_check(const E2eRun& run) {
  const auto stats = attack_stats(run.report.records);
  bool within = true, one_query = false, free_flip = false;
  double worst_linf = 0.0;
  for (const auto& v : run.report.videos) {
    if (!v.attack.success) continue;
    const auto styl = read_vtf(run.dir / "videos" / v.video_id / "stylized.vtf");
    const double d = linf_distance(v.attack.adversarial, styl);
    worst_linf = std::max(worst_linf, d);
    within = within && d <= 0.05;
    one_query = one_query || v.attack.queries == 1;
    free_flip = free_flip || v.attack.rounds == 0;
  }
  const double aq = stats.avg_queries.value_or(0.0);
  const bool ok = stats.asr == 1.0 && aq < 1e4 && within && (!free_flip || one_query) &&
                  run.report.records.size() == 20;
  return {ok, fmt("ASR %.2f (%zu/%zu), minQ %llu maxQ %llu AQ %.1f, single-query successes: %s, "
                  "max linf %.4f, %.0f s",
                  stats.asr, stats.successes, stats.total,
                  static_cast<unsigned long long>(stats.min_queries.value_or(0)),
                  static_cast<unsigned long long>(stats.max_queries.value_or(0)), aq,
                  one_query ? "yes" : "no", worst_linf, run.seconds)};
}

Outcome targeted_check(const E2eRun& run, World& w, int nes_samples) {
  const auto stats = attack_stats(run.report.records);
  int bad_label = 0, bad_ball = 0, bad_replay = 0;
  double worst_linf = 0.0;
  for (const auto& v : run.report.videos) {
    const auto vdir = run.dir / "videos" / v.video_id;
    const auto summary = replay(Transcript::read_jsonl(vdir / "transcript.jsonl"), nes_samples);
    if (summary.total != v.attack.queries) ++bad_replay;
    if (!v.attack.success) continue;
    if (!v.target || w.model.classify(v.attack.adversarial).label != *v.target) ++bad_label;
    const double d = linf_distance(v.attack.adversarial, read_vtf(vdir / "stylized.vtf"));
    worst_linf = std::max(worst_linf, d);
    if (d > 0.05) ++bad_ball;
  }
  const bool ok = stats.asr >= 0.9 && bad_label == 0 && bad_ball == 0 && bad_replay == 0 &&
                  run.report.records.size() == 20;
  return {ok, fmt("ASR %.2f (%zu/%zu), minQ %llu maxQ %llu AQ %.1f, wrong label %d, outside ball %d "
                  "(max linf %.4f), replay mismatches %d, %.0f s",
                  stats.asr, stats.successes, stats.total,
                  static_cast<unsigned long long>(stats.min_queries.value_or(0)),
                  static_cast<unsigned long long>(stats.max_queries.value_or(0)),
                  stats.avg_queries.value_or(0.0), bad_label, bad_ball, worst_linf, bad_replay,
                  run.seconds)};
}

// ---------------------------------------------------------------------------
// Metrics

Outcome metrics_check(const Context& ctx) {
  const auto v = read_vtf(ctx.assets / "toy_video.vtf");
  const double p = psnr(v, v);
  const double s = ssim(v, v);
  const bool psnr_ok = std::abs(p - 98.1311) <= 0.001;
  const bool ssim_ok = s == 1.0;

  bool stats_ok = true;
  const auto a = attack_stats({{"a", "untargeted", true, 1}, {"b", "untargeted", true, 5}});
  stats_ok = stats_ok && a.asr == 1.0 && a.min_queries == 1u && a.max_queries == 5u &&
             a.avg_queries == 3.0;
  const auto b = attack_stats({{"a", "targeted", true, 100}, {"b", "targeted", false, 300000}});
  stats_ok = stats_ok && b.asr == 0.5 && b.min_queries == 100u && b.max_queries == 100u &&
             b.avg_queries == 100.0;
  const auto c = attack_stats({{"a", "targeted", false, 7}, {"b", "targeted", false, 9}});
  stats_ok = stats_ok && c.asr == 0.0 && !c.min_queries && !c.max_queries && !c.avg_queries;

  return {psnr_ok && ssim_ok && stats_ok,
          fmt("psnr(identical) %.4f dB, ssim(identical) %.17g, attack_stats fixtures %s", p, s,
              stats_ok ? "match" : "differ")};
}

// ---------------------------------------------------------------------------
// Determinism

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism_check(const Context& ctx, World& w) {
  Timer timer;
  RunConfig cfg;
  cfg.mode = AttackMode::kTargeted;
  cfg.max_videos = 3;
  cfg.iterations = 60;
  std::vector<fs::path> dirs{ctx.work / "determinism_a", ctx.work / "determinism_b"};
  for (const auto& d : dirs) {
    fs::remove_all(d);
    cfg.output = d;
    // Fresh candidates so the second run cannot reuse cached scores of the first.
    auto styles = w.styles;
    for (auto& s : styles) s.cached_score.clear();
    run_pipeline(cfg, w.victims, w.model, w.net, styles);
  }
  int compared = 0, differing = 0;
  auto compare = [&](const fs::path& rel) {
    ++compared;
    if (!fs::exists(dirs[0] / rel) || slurp(dirs[0] / rel) != slurp(dirs[1] / rel)) ++differing;
  };
  compare("report.csv");
  compare("scores.jsonl");
  for (const auto& entry : fs::directory_iterator(dirs[0] / "videos")) {
    const auto id = entry.path().filename();
    for (const char* f : {"transcript.jsonl", "adversarial.vtf", "stylized.vtf", "meta.json"}) {
      compare(fs::path("videos") / id / f);
    }
  }
  return {differing == 0 && compared > 2,
          fmt("%d files compared across two targeted runs (3 clips, 60 transfer iterations), "
              "%d differ, %.0f s",
              compared, differing, timer.seconds())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  Context ctx;
  std::string assets = STYLEFOOL_ASSETS_DIR;
  std::string work = (fs::temp_directory_path() / "stylefool_acceptance").string();
  std::vector<std::string> only;
  app.add_option("--assets", assets, "Directory with the shipped assets");
  app.add_option("--work", work, "Scratch directory for pipeline runs");
  app.add_option("--only", only, "Run just these checks")->delimiter(',');
  app.add_flag("-v,--verbose", ctx.verbose, "Print per-clip details to stderr");
  CLI11_PARSE(app, argc, argv);
  ctx.assets = assets;
  ctx.work = work;
  fs::create_directories(ctx.work);

  auto wanted = [&](const std::string& name) {
    return only.empty() || std::find(only.begin(), only.end(), name) != only.end();
  };
  int failed = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& body) {
    if (!wanted(name)) return;
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %-20s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };

  report("gradients", [&] { return gradient_check(ctx); });
  report("nes", [&] { return nes_check(ctx); });
  report("color-themes", [&] { return color_check(ctx); });
  report("transfer-descent", [&] { return transfer_check(ctx); });
  report("metrics", [&] { return metrics_check(ctx); });

  const bool need_world = wanted("boundary-approach") || wanted("untargeted-e2e") ||
                          wanted("targeted-e2e") || wanted("determinism");
  if (need_world) {
    std::optional<World> world;
    std::string world_error;
    try {
      world = make_world(ctx);
    } catch (const std::exception& e) {
      world_error = e.what();
    }
    auto with_world = [&](const std::function<Outcome(World&)>& body) {
      if (!world) return Outcome{false, "setup failed: " + world_error};
      return body(*world);
    };
    if (wanted("boundary-approach") || wanted("untargeted-e2e")) {
      std::optional<E2eRun> run;
      std::string run_error;
      if (world) {
        try {
          run = run_mode(ctx, *world, AttackMode::kUntargeted, "untargeted");
        } catch (const std::exception& e) {
          run_error = e.what();
        }
      }
      report("boundary-approach", [&] {
        return with_world([&](World& w) {
          return run ? boundary_check(ctx, w, *run) : Outcome{false, "run failed: " + run_error};
        });
      });
      report("untargeted-e2e", [&] {
        return run ? untargeted_check(*run) : Outcome{false, "run failed: " + run_error};
      });
    }
    report("targeted-e2e", [&] {
      return with_world([&](World& w) {
        const auto run = run_mode(ctx, w, AttackMode::kTargeted, "targeted");
        return targeted_check(run, w, RunConfig{}.nes_samples);
      });
    });
    report("determinism", [&] { return with_world([&](World& w) { return determinism_check(ctx, w); }); });
  }

  std::printf("%s\n", failed == 0 ? "ALL PASS" : fmt("%d FAILED", failed).c_str());
  return failed == 0 ? 0 : 1;
}
