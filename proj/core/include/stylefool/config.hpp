#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "stylefool/blackbox_attack.hpp"
#include "stylefool/color_themes.hpp"
#include "stylefool/style_transfer.hpp"

namespace stylefool {

inline constexpr std::uint64_t kDefaultQueryLimit = QueryBudget::kDefaultLimit;

/// Everything a pipeline run depends on. Mode-dependent constants stay unset
/// until resolved, so a serialized config records only what the user chose.
struct RunConfig {
  AttackMode mode = AttackMode::kUntargeted;
  std::uint64_t seed = 20220404;

  std::filesystem::path videos;     // dataset directory of clips to attack
  std::filesystem::path style_set;  // style-set directory
  std::filesystem::path weights;    // FWF feature weights
  std::string classifier;           // toy:<path>, tcp://host:port or exec:<command>
  std::filesystem::path output;

  int max_videos = 0;  // 0 = all
  std::optional<int> target;  // fixed target label; otherwise drawn per video
  bool restrict_targets = true;

  int themes = kDefaultThemeCount;
  double mu = kDefaultMu;
  double cone_radius = 50.0;
  double cone_height = 50.0 * std::numbers::sqrt3;

  double alpha = 10.0;
  std::optional<double> beta;  // 75 targeted, 50 untargeted
  double gamma = 1e-3;
  double lambda = 1e3;
  int iterations = 300;
  double step_size = 0.05;

  int nes_samples = 64;
  std::optional<double> sigma;  // 1e-6 targeted, 1e-3 untargeted
  double eps_adv = kDefaultEpsAdv;
  double eta = 0.01;            // untargeted sign step
  double momentum = 0.9;
  int plateau_rounds = 5;
  double min_eta = 5e-4;
  std::uint64_t query_limit = kDefaultQueryLimit;

  double resolved_beta() const;
  double resolved_sigma() const;
  TransferConfig transfer_config() const;
  UntargetedSchedule untargeted_schedule() const {
    return {eta, momentum, plateau_rounds, min_eta};
  }
  ConeGeometry cone() const { return {cone_radius, cone_height}; }

  /// Throws ConfigError naming the first offending key.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

/// Grammar: one `key = value` per line; `#` starts a comment; blank lines ignored.
/// Unknown keys and malformed values raise ConfigError with the line number.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// Applies one `key = value` assignment (used for CLI overrides).
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string serialize_config(const RunConfig& cfg);

/// Replaces cfg.seed with STYLEFOOL_SEED when that variable is set.
void apply_environment(RunConfig& cfg);

}  // namespace stylefool
