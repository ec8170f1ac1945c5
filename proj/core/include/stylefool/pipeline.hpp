#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stylefool/classifier.hpp"
#include "stylefool/config.hpp"
#include "stylefool/feature_net.hpp"
#include "stylefool/metrics.hpp"
#include "stylefool/style_selection.hpp"

namespace stylefool {

struct VideoOutcome {
  std::string video_id;
  int label = 0;
  std::optional<int> target;
  std::string style_id;
  SelectionCriterion criterion;
  AttackResult attack;
  std::string error;  // non-empty when a module failed for this video
};

struct PipelineReport {
  std::vector<VideoOutcome> videos;
  std::vector<ReportRow> rows;
  std::vector<AttackRecord> records;
};

/// Selection, transfer, attack and evaluation for each clip, writing one
/// directory per clip under cfg.output plus report.csv and summary.json.
/// Per-clip failures become "error" rows; the batch always continues.
PipelineReport run_pipeline(const RunConfig& cfg, const std::vector<LabeledVideo>& videos,
                            BlackBox& classifier, const FeatureNet& net,
                            std::vector<StyleCandidate>& styles, std::ostream* log = nullptr);

/// Loads videos, styles, weights and classifier from the paths in `cfg`. The
/// classifier is contacted before any output is written.
PipelineReport run_pipeline(const RunConfig& cfg, std::ostream* log = nullptr);

/// Rebuilds the report rows of a run directory from its per-clip files. Query
/// counts come from replaying each transcript and must agree with meta.json.
std::vector<ReportRow> evaluate_run_dir(const std::filesystem::path& dir);

}  // namespace stylefool
