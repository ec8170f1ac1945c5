#include "stylefool/pipeline.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <nlohmann/json.hpp>

#include "stylefool/dataset.hpp"
#include "stylefool/error.hpp"
#include "stylefool/remote.hpp"
#include "stylefool/style_transfer.hpp"
#include "stylefool/video_io.hpp"

namespace stylefool {

namespace {

// RNG stream tags for per-clip draws derived from the run seed.
constexpr std::uint64_t kTargetStream = 0x7461726700000000ull;
constexpr std::uint64_t kNesStream = 0x6e65730000000000ull;

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

int draw_target(const RunConfig& cfg, std::size_t index, int label,
                const std::vector<StyleCandidate>& styles) {
  if (cfg.target) return *cfg.target;
  std::set<int> labels;
  for (const auto& s : styles) {
    if (s.source_label && *s.source_label != label) labels.insert(*s.source_label);
  }
  if (labels.empty()) throw ValidationError("style set offers no label other than the true one");
  SeededRng rng(cfg.seed, kTargetStream + index);
  auto it = labels.begin();
  std::advance(it, static_cast<long>(rng.below(labels.size())));
  return *it;
}

const char* outcome_name(const VideoOutcome& v) {
  if (!v.error.empty()) return "error";
  return v.attack.success ? "success" : "failure";
}

void process_video(const RunConfig& cfg, std::size_t index, const LabeledVideo& clip,
                   BlackBox& classifier, const FeatureNet& net,
                   std::vector<StyleCandidate>& styles, const std::filesystem::path& dir,
                   VideoOutcome& out) {
  QueryBudget budget(cfg.query_limit);
  Transcript transcript;
  try {
    write_vtf(clip.video, dir / "original.vtf");

    SelectionOptions sel;
    sel.mu = cfg.mu;
    sel.theme_count = cfg.themes;
    sel.cone = cfg.cone();
    sel.restrict_to_target_class = cfg.restrict_targets;
    if (cfg.mode == AttackMode::kTargeted) {
      out.target = draw_target(cfg, index, clip.label, styles);
      sel.target = out.target;
    }
    const auto chosen = select_style(clip.video, styles, sel, &classifier, &budget, &transcript);
    const StyleCandidate& style = styles[chosen.index];
    out.style_id = style.id;
    out.criterion = chosen.criterion;

    const auto stylized = transfer(clip.video, style.image, net, cfg.transfer_config()).stylized;
    write_vtf(stylized, dir / "stylized.vtf");

    NesConfig nes;
    nes.n = cfg.nes_samples;
    nes.sigma = cfg.resolved_sigma();
    nes.seed = SeededRng(cfg.seed, kNesStream + index).next_u64();
    if (cfg.mode == AttackMode::kTargeted) {
      out.attack = targeted_attack(classifier, stylized, to_video(style, clip.video.frames()),
                                   *out.target, nes, cfg.eps_adv, budget, &transcript);
    } else {
      out.attack = untargeted_attack(classifier, stylized, clip.label, nes, cfg.eps_adv, budget,
                                     &transcript, cfg.untargeted_schedule());
    }
    write_vtf(out.attack.adversarial, dir / "adversarial.vtf");
  } catch (const Error& e) {
    out.error = e.what();
    out.attack.success = false;
    out.attack.queries = budget.used();
  }
  transcript.write_jsonl(dir / "transcript.jsonl");

  nlohmann::ordered_json meta;
  meta["video_id"] = clip.id;
  meta["mode"] = attack_mode_name(cfg.mode);
  meta["label"] = clip.label;
  meta["target"] = out.target ? nlohmann::ordered_json(*out.target) : nlohmann::ordered_json();
  meta["style"] = out.style_id;
  meta["proximity"] = out.criterion.proximity;
  meta["score"] = out.criterion.confidence;
  meta["outcome"] = outcome_name(out);
  meta["queries"] = out.attack.queries;
  meta["rounds"] = out.attack.rounds;
  meta["epsilon"] = out.attack.epsilon;
  if (!out.error.empty()) meta["error"] = out.error;
  write_json(meta, dir / "meta.json");
}

}  // namespace

PipelineReport run_pipeline(const RunConfig& cfg, const std::vector<LabeledVideo>& videos,
                            BlackBox& classifier, const FeatureNet& net,
                            std::vector<StyleCandidate>& styles, std::ostream* log) {
  cfg.validate();
  if (cfg.output.empty()) throw ConfigError("'output' is not set");
  if (styles.empty()) throw ConfigError("style set is empty");
  std::filesystem::create_directories(cfg.output / "videos");

  const std::size_t count = cfg.max_videos > 0
                                ? std::min<std::size_t>(videos.size(), cfg.max_videos)
                                : videos.size();
  PipelineReport report;
  nlohmann::ordered_json run;
  run["mode"] = attack_mode_name(cfg.mode);
  run["nes_samples"] = cfg.nes_samples;
  run["videos"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < count; ++i) {
    const auto& clip = videos[i];
    const auto dir = cfg.output / "videos" / clip.id;
    std::filesystem::create_directories(dir);
    VideoOutcome outcome;
    outcome.video_id = clip.id;
    outcome.label = clip.label;
    process_video(cfg, i, clip, classifier, net, styles, dir, outcome);
    if (log) {
      *log << "[" << (i + 1) << "/" << count << "] " << clip.id << " " << outcome_name(outcome)
           << " queries=" << outcome.attack.queries;
      if (!outcome.error.empty()) *log << " (" << outcome.error << ")";
      *log << std::endl;
    }
    run["videos"].push_back(clip.id);
    report.videos.push_back(std::move(outcome));
  }
  write_json(run, cfg.output / "run.json");
  {
    std::ofstream c(cfg.output / "config.txt", std::ios::binary | std::ios::trunc);
    c << serialize_config(cfg);
  }
  write_score_cache(styles, cfg.output / "scores.jsonl");

  report.rows = evaluate_run_dir(cfg.output);
  write_report_csv(report.rows, cfg.output / "report.csv");
  for (const auto& row : report.rows) {
    report.records.push_back({row.video_id, row.mode, row.outcome == "success", row.queries});
  }
  if (!report.records.empty()) {
    const auto stats = attack_stats(report.records);
    nlohmann::ordered_json s;
    s["asr"] = stats.asr;
    s["successes"] = stats.successes;
    s["total"] = stats.total;
    s["min_queries"] = stats.min_queries ? nlohmann::ordered_json(*stats.min_queries) : nlohmann::ordered_json();
    s["max_queries"] = stats.max_queries ? nlohmann::ordered_json(*stats.max_queries) : nlohmann::ordered_json();
    s["avg_queries"] = stats.avg_queries ? nlohmann::ordered_json(*stats.avg_queries) : nlohmann::ordered_json();
    write_json(s, cfg.output / "summary.json");
  }
  return report;
}

PipelineReport run_pipeline(const RunConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (cfg.classifier.empty()) throw ConfigError("'classifier' is not set");
  if (cfg.videos.empty()) throw ConfigError("'videos' is not set");
  if (cfg.style_set.empty()) throw ConfigError("'style_set' is not set");
  if (cfg.weights.empty()) throw ConfigError("'weights' is not set");
  std::unique_ptr<BlackBox> classifier;
  try {
    classifier = open_classifier(cfg.classifier);
  } catch (const Error& e) {
    throw ConfigError("classifier '" + cfg.classifier + "' is unusable: " + e.what());
  }
  const auto videos = load_dataset(cfg.videos);
  auto styles = load_style_set(cfg.style_set, cfg.cone());
  const auto net = load_weights(cfg.weights);
  return run_pipeline(cfg, videos, *classifier, net, styles, log);
}

std::vector<ReportRow> evaluate_run_dir(const std::filesystem::path& dir) {
  const auto run = read_json(dir / "run.json");
  std::vector<ReportRow> rows;
  try {
    const int nes_samples = run.at("nes_samples").get<int>();
    for (const auto& id_json : run.at("videos")) {
      const auto id = id_json.get<std::string>();
      const auto vdir = dir / "videos" / id;
      const auto meta = read_json(vdir / "meta.json");
      ReportRow row;
      row.video_id = id;
      row.mode = meta.at("mode").get<std::string>();
      row.outcome = meta.at("outcome").get<std::string>();
      const auto summary = replay(Transcript::read_jsonl(vdir / "transcript.jsonl"), nes_samples);
      row.queries = summary.total;
      if (row.queries != meta.at("queries").get<std::uint64_t>()) {
        throw ValidationError("clip '" + id + "': transcript replays to " +
                              std::to_string(row.queries) + " queries, meta.json says " +
                              std::to_string(meta.at("queries").get<std::uint64_t>()));
      }
      if (row.outcome != "error") {
        fill_quality(row, read_vtf(vdir / "original.vtf"), read_vtf(vdir / "stylized.vtf"),
                     read_vtf(vdir / "adversarial.vtf"));
      }
      rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("run directory '" + dir.string() + "': " + e.what());
  }
  return rows;
}

}  // namespace stylefool
