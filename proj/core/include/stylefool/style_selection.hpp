#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stylefool/classifier.hpp"
#include "stylefool/color_themes.hpp"
#include "stylefool/transcript.hpp"

namespace stylefool {

/// Default weight of the target-confidence term in targeted selection.
inline constexpr double kDefaultMu = 1e4;

struct StyleCandidate {
  std::string id;
  ImageTensor image;
  /// The clip the image was taken from, if any; used as the targeted start point.
  std::optional<VideoTensor> source_video;
  std::optional<int> source_label;
  ThemeSet themes;
  /// Target label -> probed confidence score.
  std::map<int, double> cached_score;
};

struct CorpusSplit {
  std::vector<std::size_t> style;  // ascending corpus indices
  std::vector<std::size_t> rest;
};

/// Seeded split: round(fraction * N) videos (at least one) go to the style set.
CorpusSplit split_corpus(std::size_t corpus_size, double split_fraction, SeededRng& rng);

/// One candidate per style-side video: image = first frame, themes precomputed.
std::vector<StyleCandidate> build_style_set(const std::vector<LabeledVideo>& corpus,
                                            double split_fraction, SeededRng& rng,
                                            int theme_count = kDefaultThemeCount,
                                            const ConeGeometry& cone = {});

/// Candidate built from a standalone image (no source clip, no label).
StyleCandidate make_candidate(std::string id, ImageTensor image,
                              int theme_count = kDefaultThemeCount,
                              const ConeGeometry& cone = {});

/// Static clip whose every frame equals `image`.
VideoTensor tile_to_video(const ImageTensor& image, int frames);

/// p(y_t | tiled clip) if the classifier's top-1 is y_t, else 0. One counted
/// query on a cold cache, none on a warm one.
double target_confidence_score(BlackBox& classifier, StyleCandidate& candidate, int target,
                               QueryBudget& budget, Transcript* log = nullptr,
                               int frames = kClipFrames);

struct SelectionOptions {
  std::optional<int> target;  // absent: untargeted
  double mu = kDefaultMu;
  /// Targeted only: consider just candidates whose source label is the target.
  bool restrict_to_target_class = true;
  int theme_count = kDefaultThemeCount;
  ConeGeometry cone{};
};

struct SelectionCriterion {
  double proximity = 0.0;
  double confidence = 0.0;  // score of the target class; 0 when untargeted
  double mu = 0.0;
  double total() const noexcept { return proximity + mu * (1.0 - confidence); }
};

struct SelectionResult {
  std::size_t index = 0;  // into the candidate list
  SelectionCriterion criterion;
  std::uint64_t probes = 0;  // queries spent on scores
};

/// Untargeted: argmin of color proximity. Targeted: argmin of proximity +
/// mu * (1 - score). Ties go to the earliest candidate.
SelectionResult select_style(const VideoTensor& video, std::vector<StyleCandidate>& styles,
                             const SelectionOptions& options, BlackBox* classifier = nullptr,
                             QueryBudget* budget = nullptr, Transcript* log = nullptr);

/// Score cache: JSON lines {"source": id, "label": int, "score": float}.
void write_score_cache(const std::vector<StyleCandidate>& styles, const std::filesystem::path& path);
/// Fills cached_score of candidates whose id appears in the file; returns entries applied.
std::size_t read_score_cache(std::vector<StyleCandidate>& styles, const std::filesystem::path& path);

/// Style-set directory: styles.jsonl index plus one VTF per candidate and a theme cache.
void save_style_set(const std::vector<StyleCandidate>& styles, const std::filesystem::path& dir);
std::vector<StyleCandidate> load_style_set(const std::filesystem::path& dir,
                                           const ConeGeometry& cone = {});

}  // namespace stylefool
