// Command-line front end: one subcommand per pipeline stage, composable via files.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <unistd.h>

#include "stylefool/blackbox_attack.hpp"
#include "stylefool/config.hpp"
#include "stylefool/dataset.hpp"
#include "stylefool/error.hpp"
#include "stylefool/feature_net.hpp"
#include "stylefool/pipeline.hpp"
#include "stylefool/remote.hpp"
#include "stylefool/style_selection.hpp"
#include "stylefool/style_transfer.hpp"
#include "stylefool/video_io.hpp"

using namespace stylefool;

namespace {

VideoTensor read_clip(const std::string& path) {
  if (std::filesystem::is_directory(path)) return frames_from_pngs(path);
  return read_vtf(path);
}

ImageTensor read_image(const std::string& path) { return read_clip(path).frame(0); }

// Diagonal colour waves; shares no structure with the synthetic motion clips.
ImageTensor sinusoid_pattern(int h, int w) {
  std::vector<float> px(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = (x + y) * 0.6;
      float* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
      p[0] = static_cast<float>(0.5 + 0.5 * std::sin(t));
      p[1] = static_cast<float>(0.5 + 0.5 * std::sin(t * 0.7 + 2.0));
      p[2] = static_cast<float>(0.5 + 0.5 * std::cos(x * 0.9));
    }
  }
  return ImageTensor(h, w, 3, std::move(px));
}

void print_stats(const PipelineReport& report) {
  if (report.records.empty()) return;
  const auto s = attack_stats(report.records);
  std::printf("ASR %.4f (%zu/%zu)", s.asr, s.successes, s.total);
  if (s.avg_queries) {
    std::printf("  minQ %llu  maxQ %llu  AQ %.1f", static_cast<unsigned long long>(*s.min_queries),
                static_cast<unsigned long long>(*s.max_queries), *s.avg_queries);
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box video adversarial attack via style transfer"};
  app.require_subcommand(1);

  // make-dataset
  auto* make = app.add_subcommand("make-dataset", "Synthesize a labeled toy motion corpus");
  std::string make_out, make_prefix = "vid";
  int make_per_class = 10;
  std::uint64_t make_seed = 1, make_stream = 0;
  make->add_option("--out", make_out, "Output directory")->required();
  make->add_option("--per-class", make_per_class, "Clips per class");
  make->add_option("--seed", make_seed, "RNG seed");
  make->add_option("--stream", make_stream, "RNG stream");
  make->add_option("--prefix", make_prefix, "Clip id prefix");

  // train-toy
  auto* train = app.add_subcommand("train-toy", "Train the toy motion classifier");
  std::string train_dir, test_dir, model_out;
  std::uint64_t train_seed = 1, train_stream = 0;
  TrainOptions topt;
  train->add_option("--train", train_dir, "Training dataset directory")->required();
  train->add_option("--test", test_dir, "Held-out dataset directory")->required();
  train->add_option("--out", model_out, "Output TCW1 file")->required();
  train->add_option("--seed", train_seed, "RNG seed");
  train->add_option("--stream", train_stream, "RNG stream");
  train->add_option("--epochs", topt.epochs, "Epochs per attempt");
  train->add_option("--batch", topt.batch_size, "Mini-batch size");
  train->add_option("--lr", topt.learning_rate, "Adam learning rate");
  train->add_option("--min-accuracy", topt.min_accuracy, "Held-out accuracy gate");

  // build-styles
  auto* build = app.add_subcommand("build-styles", "Split a corpus into a style set and victims");
  std::string corpus_dir, styles_out, rest_out;
  double fraction = 0.7;
  std::uint64_t split_seed = 1;
  build->add_option("--corpus", corpus_dir, "Dataset directory")->required();
  build->add_option("--out", styles_out, "Style-set directory")->required();
  build->add_option("--rest", rest_out, "Write the non-style clips here as a dataset");
  build->add_option("--fraction", fraction, "Share of the corpus used as styles");
  build->add_option("--seed", split_seed, "RNG seed");

  // select
  auto* select = app.add_subcommand("select", "Choose the style for one clip");
  std::string sel_video, sel_styles, sel_mode = "untargeted", sel_classifier;
  int sel_target = -1;
  double sel_mu = kDefaultMu;
  bool sel_all = false;
  select->add_option("--video", sel_video, "Clip (VTF or PNG directory)")->required();
  select->add_option("--styles", sel_styles, "Style-set directory")->required();
  select->add_option("--mode", sel_mode, "targeted or untargeted");
  select->add_option("--target", sel_target, "Target label (targeted)");
  select->add_option("--classifier", sel_classifier, "toy:<path>, tcp://host:port or exec:<cmd>");
  select->add_option("--mu", sel_mu, "Weight of the target-confidence term");
  select->add_flag("--all-styles", sel_all, "Targeted: consider every style, not just the target class");

  // transfer
  auto* xfer = app.add_subcommand("transfer", "Stylize a clip");
  std::string xf_video, xf_style, xf_styles, xf_style_id, xf_weights, xf_out, xf_trace;
  TransferConfig xcfg;
  xfer->add_option("--video", xf_video, "Clip (VTF or PNG directory)")->required();
  xfer->add_option("--style-image", xf_style, "Style image (VTF or PNG directory; first frame)");
  xfer->add_option("--styles", xf_styles, "Style-set directory (with --style-id)");
  xfer->add_option("--style-id", xf_style_id, "Candidate id inside --styles");
  xfer->add_option("--weights", xf_weights, "FWF feature weights")->required();
  xfer->add_option("--out", xf_out, "Output VTF")->required();
  xfer->add_option("--trace", xf_trace, "Write the per-iteration loss trace as CSV");
  xfer->add_option("--alpha", xcfg.alpha);
  xfer->add_option("--beta", xcfg.beta);
  xfer->add_option("--gamma", xcfg.gamma);
  xfer->add_option("--lambda", xcfg.lambda);
  xfer->add_option("--iterations", xcfg.iterations);
  xfer->add_option("--step", xcfg.step_size);

  // attack
  auto* attack = app.add_subcommand("attack", "Run the black-box attack on a stylized clip");
  std::string at_mode = "untargeted", at_stylized, at_init, at_classifier, at_out, at_transcript,
              at_resume;
  int at_label = -1, at_target = -1, at_n = 64;
  std::optional<double> at_sigma;
  double at_eps = kDefaultEpsAdv;
  UntargetedSchedule at_schedule;
  std::uint64_t at_seed = 1, at_budget = QueryBudget::kDefaultLimit;
  attack->add_option("--mode", at_mode, "targeted or untargeted");
  attack->add_option("--stylized", at_stylized, "Stylized clip (VTF)")->required();
  attack->add_option("--label", at_label, "True label (untargeted)");
  attack->add_option("--target", at_target, "Target label (targeted)");
  attack->add_option("--init", at_init, "Targeted start clip (VTF)");
  attack->add_option("--classifier", at_classifier, "toy:<path>, tcp://host:port or exec:<cmd>")
      ->required();
  attack->add_option("--out", at_out, "Adversarial clip (VTF)")->required();
  attack->add_option("--transcript", at_transcript, "Query transcript (JSONL)");
  attack->add_option("--samples", at_n, "NES samples per estimate");
  attack->add_option("--sigma", at_sigma, "NES noise scale");
  attack->add_option("--eps-adv", at_eps, "Final l-inf radius");
  attack->add_option("--eta", at_schedule.eta, "Untargeted initial step size");
  attack->add_option("--momentum", at_schedule.momentum, "Untargeted gradient averaging");
  attack->add_option("--plateau", at_schedule.plateau_rounds,
                     "Rounds without progress before the step halves (0 keeps it fixed)");
  attack->add_option("--seed", at_seed, "NES seed");
  attack->add_option("--budget", at_budget, "Query limit");
  attack->add_option("--resume", at_resume, "Not supported");

  // eval
  auto* eval = app.add_subcommand("eval", "Rebuild the report CSV of a run directory");
  std::string ev_run, ev_out;
  eval->add_option("--run", ev_run, "Run directory")->required();
  eval->add_option("--out", ev_out, "CSV path (default: stdout)");

  // run
  auto* run = app.add_subcommand("run", "Full pipeline from a config file");
  std::string run_config;
  std::vector<std::string> run_sets;
  std::optional<std::string> run_mode, run_output, run_classifier;
  std::optional<std::uint64_t> run_seed;
  std::optional<int> run_max;
  run->add_option("--config", run_config, "Config file (key = value lines)");
  run->add_option("--set", run_sets, "Override a config key: key=value (repeatable)");
  run->add_option("--mode", run_mode, "targeted or untargeted");
  run->add_option("--seed", run_seed, "Run seed");
  run->add_option("--output", run_output, "Output directory");
  run->add_option("--classifier", run_classifier, "Classifier endpoint");
  run->add_option("--max-videos", run_max, "Attack at most this many clips");
  bool run_print = false;
  run->add_flag("--print-config", run_print, "Print the resolved config and exit");

  // serve
  auto* serve = app.add_subcommand("serve", "Expose a toy model over the wire protocol");
  std::string sv_model;
  int sv_port = 0, sv_max = 0;
  bool sv_stdio = false;
  serve->add_option("--model", sv_model, "TCW1 model file")->required();
  serve->add_option("--port", sv_port, "TCP port on 127.0.0.1 (0 = any)");
  serve->add_option("--max-connections", sv_max, "Exit after this many connections");
  serve->add_flag("--stdio", sv_stdio, "Serve on stdin/stdout instead of TCP");

  // gen-weights
  auto* gen = app.add_subcommand("gen-weights", "Write seeded orthogonal feature weights");
  std::string gen_out;
  std::uint64_t gen_seed = kDefaultFeatureSeed;
  double gen_gain = kDefaultFeatureGain;
  gen->add_option("--out", gen_out, "Output FWF file")->required();
  gen->add_option("--seed", gen_seed);
  gen->add_option("--gain", gen_gain);

  // make-pattern
  auto* pattern = app.add_subcommand("make-pattern", "Write a one-frame sinusoidal colour pattern");
  std::string pat_out;
  int pat_size = 32;
  pattern->add_option("--out", pat_out, "Output VTF")->required();
  pattern->add_option("--size", pat_size, "Edge length in pixels")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*make) {
      SeededRng rng(make_seed, make_stream);
      const auto data = synth_dataset(rng, make_per_class, make_prefix);
      save_dataset(data, make_out);
      std::printf("wrote %zu clips to %s\n", data.size(), make_out.c_str());
    } else if (*train) {
      SeededRng rng(train_seed, train_stream);
      const auto report = train_toy(load_dataset(train_dir), load_dataset(test_dir), rng, topt);
      save_toy(report.model, model_out);
      std::printf("held-out accuracy %.4f after %d attempt(s); wrote %s\n", report.test_accuracy,
                  report.attempts, model_out.c_str());
    } else if (*build) {
      const auto corpus = load_dataset(corpus_dir);
      SeededRng rng(split_seed);
      const auto split = split_corpus(corpus.size(), fraction, rng);
      SeededRng again(split_seed);
      const auto styles = build_style_set(corpus, fraction, again);
      save_style_set(styles, styles_out);
      if (!rest_out.empty()) {
        std::vector<LabeledVideo> rest;
        for (auto i : split.rest) rest.push_back(corpus[i]);
        save_dataset(rest, rest_out);
      }
      std::printf("%zu style candidates, %zu remaining clips\n", styles.size(), split.rest.size());
    } else if (*select) {
      const auto video = read_clip(sel_video);
      auto styles = load_style_set(sel_styles);
      SelectionOptions opt;
      opt.mu = sel_mu;
      opt.restrict_to_target_class = !sel_all;
      std::unique_ptr<BlackBox> classifier;
      QueryBudget budget;
      if (parse_attack_mode(sel_mode) == AttackMode::kTargeted) {
        if (sel_target < 0) throw ConfigError("--target is required in targeted mode");
        if (sel_classifier.empty()) throw ConfigError("--classifier is required in targeted mode");
        opt.target = sel_target;
        classifier = open_classifier(sel_classifier);
      }
      const auto r = select_style(video, styles, opt, classifier.get(), &budget);
      const auto& c = r.criterion;
      std::printf("style %s\nproximity %.6f\nscore %.6f\nmu_term %.6f\ntotal %.6f\nqueries %llu\n",
                  styles[r.index].id.c_str(), c.proximity, c.confidence, c.mu * (1.0 - c.confidence),
                  c.total(), static_cast<unsigned long long>(r.probes));
      if (opt.target) write_score_cache(styles, std::filesystem::path(sel_styles) / "scores.jsonl");
    } else if (*xfer) {
      const auto video = read_clip(xf_video);
      ImageTensor style;
      if (!xf_style.empty()) {
        style = read_image(xf_style);
      } else if (!xf_styles.empty() && !xf_style_id.empty()) {
        bool found = false;
        for (auto& s : load_style_set(xf_styles)) {
          if (s.id == xf_style_id) {
            style = s.image;
            found = true;
          }
        }
        if (!found) throw ConfigError("no style '" + xf_style_id + "' in " + xf_styles);
      } else {
        throw ConfigError("give --style-image or --styles with --style-id");
      }
      const auto net = load_weights(xf_weights);
      const auto result = transfer(video, style, net, xcfg, std::nullopt,
                                   [&](int it, const LossBreakdown& l) {
                                     if (it % 50 == 0) {
                                       std::fprintf(stderr, "iter %4d  total %.6g\n", it, l.total);
                                     }
                                   });
      write_vtf(result.stylized, xf_out);
      if (!xf_trace.empty()) {
        std::ofstream t(xf_trace);
        t << "iteration,content,style,tv,temporal,total\n";
        for (std::size_t i = 0; i < result.trace.size(); ++i) {
          const auto& l = result.trace[i];
          t << i << "," << l.content << "," << l.style << "," << l.tv << "," << l.temporal << ","
            << l.total << "\n";
        }
      }
      std::printf("loss %.6g -> %.6g\n", result.trace.front().total, result.trace.back().total);
    } else if (*attack) {
      if (!at_resume.empty()) {
        throw ConfigError("resuming an attack from a transcript is not supported");
      }
      const auto mode = parse_attack_mode(at_mode);
      const auto stylized = read_vtf(at_stylized);
      auto classifier = open_classifier(at_classifier);
      QueryBudget budget(at_budget);
      Transcript log;
      NesConfig nes;
      nes.n = at_n;
      nes.seed = at_seed;
      nes.sigma = at_sigma.value_or(mode == AttackMode::kTargeted ? kTargetedSigma : kUntargetedSigma);
      AttackResult r;
      if (mode == AttackMode::kTargeted) {
        if (at_target < 0 || at_init.empty()) throw ConfigError("targeted mode needs --target and --init");
        r = targeted_attack(*classifier, stylized, read_vtf(at_init), at_target, nes, at_eps, budget,
                            &log);
      } else {
        if (at_label < 0) throw ConfigError("untargeted mode needs --label");
        r = untargeted_attack(*classifier, stylized, at_label, nes, at_eps, budget, &log,
                               at_schedule);
      }
      write_vtf(r.adversarial, at_out);
      if (!at_transcript.empty()) log.write_jsonl(at_transcript);
      std::printf("%s queries %llu label %d confidence %.6f eps %.4f\n",
                  r.success ? "success" : "failure", static_cast<unsigned long long>(r.queries),
                  r.last.label, r.last.confidence, r.epsilon);
      return r.success ? 0 : 2;
    } else if (*eval) {
      const auto rows = evaluate_run_dir(ev_run);
      if (ev_out.empty()) {
        std::fputs(format_report_csv(rows).c_str(), stdout);
      } else {
        write_report_csv(rows, ev_out);
      }
    } else if (*run) {
      RunConfig cfg = run_config.empty() ? RunConfig{} : load_config(run_config);
      apply_environment(cfg);
      for (const auto& kv : run_sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (run_mode) set_config_value(cfg, "mode", *run_mode);
      if (run_seed) cfg.seed = *run_seed;
      if (run_output) cfg.output = *run_output;
      if (run_classifier) cfg.classifier = *run_classifier;
      if (run_max) cfg.max_videos = *run_max;
      cfg.validate();
      if (run_print) {
        std::fputs(serialize_config(cfg).c_str(), stdout);
        return 0;
      }
      print_stats(run_pipeline(cfg, &std::cerr));
    } else if (*serve) {
      ToyClassifier model = load_toy(sv_model);
      if (sv_stdio) {
        serve_stream(model, STDIN_FILENO, STDOUT_FILENO);
      } else {
        serve_tcp(model, sv_port, sv_max, [](int port) {
          std::printf("listening on 127.0.0.1:%d\n", port);
          std::fflush(stdout);
        });
      }
    } else if (*gen) {
      save_weights(make_default_feature_net(gen_seed, gen_gain), gen_out);
      std::printf("wrote %s\n", gen_out.c_str());
    } else if (*pattern) {
      write_vtf(tile_to_video(sinusoid_pattern(pat_size, pat_size), 1), pat_out);
      std::printf("wrote %s\n", pat_out.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
