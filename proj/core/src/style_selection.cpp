#include "stylefool/style_selection.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "stylefool/error.hpp"
#include "stylefool/video_io.hpp"

namespace stylefool {

CorpusSplit split_corpus(std::size_t corpus_size, double split_fraction, SeededRng& rng) {
  if (corpus_size == 0) throw ValidationError("style corpus is empty");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw ValidationError("split fraction must lie in (0,1), got " + std::to_string(split_fraction));
  }
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(corpus_size))));
  auto order = rng.permutation(corpus_size);
  std::vector<bool> chosen(corpus_size, false);
  for (std::size_t i = 0; i < take && i < corpus_size; ++i) chosen[order[i]] = true;
  CorpusSplit split;
  for (std::size_t i = 0; i < corpus_size; ++i) (chosen[i] ? split.style : split.rest).push_back(i);
  return split;
}

StyleCandidate make_candidate(std::string id, ImageTensor image, int theme_count,
                              const ConeGeometry& cone) {
  StyleCandidate c;
  c.themes = extract_themes(image, theme_count, id, cone);
  c.id = std::move(id);
  c.image = std::move(image);
  return c;
}

std::vector<StyleCandidate> build_style_set(const std::vector<LabeledVideo>& corpus,
                                            double split_fraction, SeededRng& rng, int theme_count,
                                            const ConeGeometry& cone) {
  const auto split = split_corpus(corpus.size(), split_fraction, rng);
  std::vector<StyleCandidate> out;
  out.reserve(split.style.size());
  for (std::size_t i : split.style) {
    const auto& v = corpus[i];
    StyleCandidate c = make_candidate(v.id, v.video.frame(0), theme_count, cone);
    c.source_video = v.video;
    c.source_label = v.label;
    out.push_back(std::move(c));
  }
  return out;
}

VideoTensor tile_to_video(const ImageTensor& image, int frames) {
  if (frames < 1) throw ValidationError("tile_to_video needs at least one frame");
  std::vector<float> data;
  data.reserve(image.size() * static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) data.insert(data.end(), image.data().begin(), image.data().end());
  return VideoTensor(frames, image.height(), image.width(), image.channels(), std::move(data));
}

double target_confidence_score(BlackBox& classifier, StyleCandidate& candidate, int target,
                               QueryBudget& budget, Transcript* log, int frames) {
  if (auto it = candidate.cached_score.find(target); it != candidate.cached_score.end()) {
    return it->second;
  }
  const Prediction p = logged_query(classifier, tile_to_video(candidate.image, frames), budget,
                                    QueryKind::kProbe, 1.0, log);
  const double score = p.label == target ? p.confidence : 0.0;
  candidate.cached_score[target] = score;
  return score;
}

SelectionResult select_style(const VideoTensor& video, std::vector<StyleCandidate>& styles,
                             const SelectionOptions& options, BlackBox* classifier,
                             QueryBudget* budget, Transcript* log) {
  if (styles.empty()) throw ValidationError("style set is empty");
  if (options.target && (!classifier || !budget)) {
    throw ValidationError("targeted selection needs a classifier and a query budget");
  }
  const ThemeSet clip = extract_themes(video, options.theme_count, {}, options.cone);

  SelectionResult best;
  bool found = false;
  const std::uint64_t used_before = budget ? budget->used() : 0;
  for (std::size_t i = 0; i < styles.size(); ++i) {
    auto& s = styles[i];
    if (options.target && options.restrict_to_target_class && s.source_label != options.target) {
      continue;
    }
    SelectionCriterion c;
    c.proximity = color_proximity(clip, s.themes);
    if (options.target) {
      c.mu = options.mu;
      c.confidence = target_confidence_score(*classifier, s, *options.target, *budget, log,
                                             video.frames());
    }
    if (!found || c.total() < best.criterion.total()) {
      best.index = i;
      best.criterion = c;
      found = true;
    }
  }
  if (!found) {
    throw ValidationError("no style candidate carries target label " +
                          std::to_string(*options.target));
  }
  best.probes = budget ? budget->used() - used_before : 0;
  return best;
}

void write_score_cache(const std::vector<StyleCandidate>& styles, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& s : styles) {
    for (const auto& [label, score] : s.cached_score) {
      nlohmann::ordered_json j;
      j["source"] = s.id;
      j["label"] = label;
      j["score"] = score;
      out << j.dump() << '\n';
    }
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::size_t read_score_cache(std::vector<StyleCandidate>& styles, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::map<std::string, StyleCandidate*> by_id;
  for (auto& s : styles) by_id[s.id] = &s;
  std::size_t applied = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const double score = j.at("score").get<double>();
      if (!(score >= 0.0 && score <= 1.0)) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                              ": score outside [0,1]");
      }
      if (auto it = by_id.find(j.at("source").get<std::string>()); it != by_id.end()) {
        it->second->cached_score[j.at("label").get<int>()] = score;
        ++applied;
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return applied;
}

namespace {
constexpr const char* kIndexFile = "styles.jsonl";
constexpr const char* kThemeFile = "themes.jsonl";
constexpr const char* kScoreFile = "scores.jsonl";
}  // namespace

void save_style_set(const std::vector<StyleCandidate>& styles, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / kIndexFile, std::ios::binary | std::ios::trunc);
  if (!index) throw IoError("cannot write style index in '" + dir.string() + "'");
  std::vector<ThemeSet> themes;
  for (const auto& s : styles) {
    const std::string file = s.id + ".vtf";
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["file"] = file;
    if (s.source_video) {
      j["kind"] = "video";
      write_vtf(*s.source_video, dir / file);
    } else {
      j["kind"] = "image";
      write_vtf(tile_to_video(s.image, 1), dir / file);
    }
    j["label"] = s.source_label ? nlohmann::ordered_json(*s.source_label) : nlohmann::ordered_json();
    index << j.dump() << '\n';
    themes.push_back(s.themes);
  }
  if (!index) throw IoError("write to style index in '" + dir.string() + "' failed");
  write_theme_cache(themes, dir / kThemeFile);
  write_score_cache(styles, dir / kScoreFile);
}

std::vector<StyleCandidate> load_style_set(const std::filesystem::path& dir,
                                           const ConeGeometry& cone) {
  std::ifstream index(dir / kIndexFile, std::ios::binary);
  if (!index) throw IoError("no style index in '" + dir.string() + "'");
  std::map<std::string, ThemeSet> cached;
  if (std::filesystem::exists(dir / kThemeFile)) {
    for (auto& t : read_theme_cache(dir / kThemeFile)) cached[t.source] = std::move(t);
  }
  std::vector<StyleCandidate> styles;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::string>();
      VideoTensor clip = read_vtf(dir / j.at("file").get<std::string>());
      StyleCandidate c;
      c.id = id;
      c.image = clip.frame(0);
      if (j.at("kind").get<std::string>() == "video") c.source_video = std::move(clip);
      if (!j.at("label").is_null()) c.source_label = j.at("label").get<int>();
      if (auto it = cached.find(id); it != cached.end()) {
        c.themes = it->second;
      } else {
        c.themes = extract_themes(c.image, kDefaultThemeCount, id, cone);
      }
      styles.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("style index in '" + dir.string() + "': " + e.what());
    }
  }
  if (std::filesystem::exists(dir / kScoreFile)) read_score_cache(styles, dir / kScoreFile);
  return styles;
}

}  // namespace stylefool
