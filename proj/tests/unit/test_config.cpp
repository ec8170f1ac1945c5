#include <gtest/gtest.h>

#include <cstdlib>

#include "stylefool/config.hpp"
#include "stylefool/error.hpp"

namespace stylefool {
namespace {

TEST(RunConfig, DefaultsMatchPublishedConstants) {
  RunConfig cfg;
  EXPECT_EQ(cfg.themes, 3);
  EXPECT_EQ(cfg.mu, 1e4);
  EXPECT_EQ(cfg.alpha, 10.0);
  EXPECT_EQ(cfg.gamma, 1e-3);
  EXPECT_EQ(cfg.lambda, 1e3);
  EXPECT_EQ(cfg.nes_samples, 64);
  EXPECT_EQ(cfg.eps_adv, 0.05);
  EXPECT_EQ(cfg.query_limit, 300000u);
  EXPECT_EQ(cfg.cone_radius, 50.0);
  EXPECT_NEAR(cfg.cone_height, 86.60254037844386, 1e-12);
  EXPECT_EQ(cfg.resolved_beta(), 50.0);
  EXPECT_EQ(cfg.resolved_sigma(), 1e-3);
  cfg.mode = AttackMode::kTargeted;
  EXPECT_EQ(cfg.resolved_beta(), 75.0);
  EXPECT_EQ(cfg.resolved_sigma(), 1e-6);
  cfg.beta = 20.0;
  EXPECT_EQ(cfg.transfer_config().beta, 20.0);
}

TEST(RunConfig, ParseSerializeParseIsIdentity) {
  const std::string text = R"(# a run
mode = targeted
seed = 7
videos = data/victims
style_set = data/styles
weights = assets/feature_net.fwf
classifier = exec:./serve --stdio   # trailing comment
output = out dir
max_videos = 4
target = 2
restrict_targets = false
mu = 2500
beta = 60.5
lambda = 0
iterations = 12
sigma = 1e-7
eps_adv = 0.03
eta = 0.0025
query_limit = 12345
)";
  auto cfg = parse_config(text);
  EXPECT_EQ(cfg.mode, AttackMode::kTargeted);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.classifier, "exec:./serve --stdio");
  EXPECT_EQ(cfg.output, "out dir");
  EXPECT_EQ(cfg.target, 2);
  EXPECT_FALSE(cfg.restrict_targets);
  EXPECT_EQ(cfg.beta, 60.5);
  EXPECT_EQ(cfg.sigma, 1e-7);
  EXPECT_EQ(cfg.query_limit, 12345u);
  const auto once = serialize_config(cfg);
  EXPECT_EQ(parse_config(once), cfg);
  EXPECT_EQ(serialize_config(parse_config(once)), once);

  RunConfig defaults;
  EXPECT_EQ(parse_config(serialize_config(defaults)), defaults);
  EXPECT_EQ(serialize_config(defaults).find("beta"), std::string::npos);
}

TEST(RunConfig, ErrorsNameTheLine) {
  try {
    parse_config("seed = 1\nfrobnicate = 3\n", "run.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("frobnicate"), std::string::npos);
  }
  EXPECT_THROW(parse_config("seed = banana\n"), ConfigError);
  EXPECT_THROW(parse_config("just words\n"), ConfigError);
  EXPECT_THROW(parse_config("mode = sideways\n"), ConfigError);
  EXPECT_THROW(parse_config("restrict_targets = maybe\n"), ConfigError);
}

TEST(RunConfig, ValidationRejectsNonsense) {
  RunConfig cfg;
  cfg.nes_samples = 63;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.mu = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.eps_adv = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.min_eta = 0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  EXPECT_NO_THROW(cfg.validate());
}

TEST(RunConfig, OverridesAndEnvironment) {
  auto cfg = parse_config("seed = 5\nalpha = 3\n");
  set_config_value(cfg, "alpha", "4");
  EXPECT_EQ(cfg.alpha, 4.0);
  EXPECT_THROW(set_config_value(cfg, "nope", "1"), ConfigError);

  ::setenv("STYLEFOOL_SEED", "99", 1);
  apply_environment(cfg);
  EXPECT_EQ(cfg.seed, 99u);
  ::setenv("STYLEFOOL_SEED", "not-a-number", 1);
  EXPECT_THROW(apply_environment(cfg), ConfigError);
  ::unsetenv("STYLEFOOL_SEED");
  cfg.seed = 5;
  apply_environment(cfg);
  EXPECT_EQ(cfg.seed, 5u);
}

}  // namespace
}  // namespace stylefool
