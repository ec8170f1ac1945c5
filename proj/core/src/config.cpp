#include "stylefool/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "stylefool/error.hpp"

namespace stylefool {

double RunConfig::resolved_beta() const {
  return beta.value_or(mode == AttackMode::kTargeted ? 75.0 : 50.0);
}

double RunConfig::resolved_sigma() const {
  return sigma.value_or(mode == AttackMode::kTargeted ? kTargetedSigma : kUntargetedSigma);
}

TransferConfig RunConfig::transfer_config() const {
  TransferConfig t;
  t.alpha = alpha;
  t.beta = resolved_beta();
  t.gamma = gamma;
  t.lambda = lambda;
  t.iterations = iterations;
  t.step_size = step_size;
  return t;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("'" + key + "': cannot parse '" + value + "' as a number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + value + "'");
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::optional<std::string>(const RunConfig&)> get;  // nullopt = unset
};

template <typename M>
Field number_field(M RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<M>(k, v);
          },
          [member](const RunConfig& c) -> std::optional<std::string> {
            if constexpr (std::is_floating_point_v<M>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

Field optional_double(std::optional<double> RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<double>(k, v);
          },
          [member](const RunConfig& c) -> std::optional<std::string> {
            if (!(c.*member)) return std::nullopt;
            return format_double(*(c.*member));
          }};
}

Field path_field(std::filesystem::path RunConfig::*member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) -> std::optional<std::string> {
            if ((c.*member).empty()) return std::nullopt;
            return (c.*member).string();
          }};
}

/// Keys in serialization order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v != "targeted" && v != "untargeted") {
            throw ConfigError("'" + k + "': expected targeted or untargeted, got '" + v + "'");
          }
          c.mode = parse_attack_mode(v);
        },
        [](const RunConfig& c) -> std::optional<std::string> { return attack_mode_name(c.mode); }}},
      {"seed", number_field(&RunConfig::seed)},
      {"videos", path_field(&RunConfig::videos)},
      {"style_set", path_field(&RunConfig::style_set)},
      {"weights", path_field(&RunConfig::weights)},
      {"classifier",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.classifier = v; },
        [](const RunConfig& c) -> std::optional<std::string> {
          if (c.classifier.empty()) return std::nullopt;
          return c.classifier;
        }}},
      {"output", path_field(&RunConfig::output)},
      {"max_videos", number_field(&RunConfig::max_videos)},
      {"target",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.target = parse_number<int>(k, v);
        },
        [](const RunConfig& c) -> std::optional<std::string> {
          if (!c.target) return std::nullopt;
          return std::to_string(*c.target);
        }}},
      {"restrict_targets",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.restrict_targets = parse_bool(k, v);
        },
        [](const RunConfig& c) -> std::optional<std::string> {
          return c.restrict_targets ? "true" : "false";
        }}},
      {"themes", number_field(&RunConfig::themes)},
      {"mu", number_field(&RunConfig::mu)},
      {"cone_radius", number_field(&RunConfig::cone_radius)},
      {"cone_height", number_field(&RunConfig::cone_height)},
      {"alpha", number_field(&RunConfig::alpha)},
      {"beta", optional_double(&RunConfig::beta)},
      {"gamma", number_field(&RunConfig::gamma)},
      {"lambda", number_field(&RunConfig::lambda)},
      {"iterations", number_field(&RunConfig::iterations)},
      {"step_size", number_field(&RunConfig::step_size)},
      {"nes_samples", number_field(&RunConfig::nes_samples)},
      {"sigma", optional_double(&RunConfig::sigma)},
      {"eps_adv", number_field(&RunConfig::eps_adv)},
      {"eta", number_field(&RunConfig::eta)},
      {"momentum", number_field(&RunConfig::momentum)},
      {"plateau_rounds", number_field(&RunConfig::plateau_rounds)},
      {"min_eta", number_field(&RunConfig::min_eta)},
      {"query_limit", number_field(&RunConfig::query_limit)},
  };
  return table;
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) {
    if (auto v = field.get(cfg)) out += name + " = " + *v + "\n";
  }
  return out;
}

void RunConfig::validate() const {
  auto positive = [](const char* key, double v) {
    if (!(v > 0.0)) throw ConfigError("'" + std::string(key) + "' must be positive");
  };
  positive("themes", themes);
  positive("mu", mu);
  positive("cone_radius", cone_radius);
  positive("cone_height", cone_height);
  positive("alpha", alpha);
  positive("beta", resolved_beta());
  positive("gamma", gamma);
  if (lambda < 0.0) throw ConfigError("'lambda' must be non-negative");
  positive("iterations", iterations);
  positive("step_size", step_size);
  positive("nes_samples", nes_samples);
  if (nes_samples % 2 != 0) throw ConfigError("'nes_samples' must be even");
  positive("sigma", resolved_sigma());
  positive("eps_adv", eps_adv);
  if (eps_adv > 1.0) throw ConfigError("'eps_adv' must not exceed 1");
  positive("eta", eta);
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("'momentum' must lie in [0,1)");
  if (plateau_rounds < 0 || plateau_rounds == 1) {
    throw ConfigError("'plateau_rounds' must be 0 or at least 2");
  }
  positive("min_eta", min_eta);
  if (min_eta > eta) throw ConfigError("'min_eta' must not exceed 'eta'");
  positive("query_limit", static_cast<double>(query_limit));
  if (max_videos < 0) throw ConfigError("'max_videos' must be non-negative");
  if (target && *target < 0) throw ConfigError("'target' must be a class index");
}

void apply_environment(RunConfig& cfg) {
  const char* env = std::getenv("STYLEFOOL_SEED");
  if (!env || !*env) return;
  cfg.seed = parse_number<std::uint64_t>("STYLEFOOL_SEED", trim(env));
}

}  // namespace stylefool
