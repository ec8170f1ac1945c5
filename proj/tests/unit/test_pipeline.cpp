#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "stylefool/config.hpp"
#include "stylefool/dataset.hpp"
#include "stylefool/error.hpp"
#include "stylefool/metrics.hpp"
#include "stylefool/pipeline.hpp"
#include "stylefool/style_selection.hpp"
#include "test_support.hpp"

namespace stylefool {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct SmallWorld {
  std::vector<LabeledVideo> victims;
  std::vector<StyleCandidate> styles;
  ToyClassifier model;
  FeatureNet net = make_default_feature_net(kDefaultFeatureSeed, kDefaultFeatureGain);

  SmallWorld() {
    SeededRng data(131);
    auto corpus = synth_dataset(data, 2);
    SeededRng split(132);
    styles = build_style_set(corpus, 0.5, split);
    for (const auto& v : corpus) {
      const bool is_style = std::any_of(styles.begin(), styles.end(),
                                        [&](const auto& s) { return s.id == v.id; });
      if (!is_style) victims.push_back(v);
    }
    SeededRng init(133);
    model = ToyClassifier::initialize(init);
  }
};

RunConfig small_config(const fs::path& out) {
  RunConfig cfg;
  cfg.output = out;
  cfg.iterations = 2;
  cfg.max_videos = 2;
  cfg.nes_samples = 8;
  cfg.query_limit = 60;
  return cfg;
}

TEST(Pipeline, SameSeedRunsAreByteIdentical) {
  testing::TempDir a, b;
  SmallWorld w1, w2;
  auto r1 = run_pipeline(small_config(a.path()), w1.victims, w1.model, w1.net, w1.styles);
  auto r2 = run_pipeline(small_config(b.path()), w2.victims, w2.model, w2.net, w2.styles);
  ASSERT_EQ(r1.rows.size(), 2u);
  EXPECT_EQ(slurp(a / "report.csv"), slurp(b / "report.csv"));
  for (const auto& row : r1.rows) {
    const auto rel = fs::path("videos") / row.video_id / "transcript.jsonl";
    EXPECT_EQ(slurp(a.path() / rel), slurp(b.path() / rel)) << row.video_id;
    EXPECT_TRUE(fs::exists(a.path() / "videos" / row.video_id / "adversarial.vtf"));
    EXPECT_LE(row.queries, 60u);
  }
  EXPECT_TRUE(fs::exists(a / "summary.json"));
  EXPECT_EQ(parse_config(slurp(a / "config.txt")), small_config(a.path()));
}

TEST(Pipeline, EvaluateRunDirReproducesReport) {
  testing::TempDir dir;
  SmallWorld w;
  auto report = run_pipeline(small_config(dir.path()), w.victims, w.model, w.net, w.styles);
  EXPECT_EQ(format_report_csv(evaluate_run_dir(dir.path())), slurp(dir / "report.csv"));
  EXPECT_EQ(format_report_csv(report.rows), slurp(dir / "report.csv"));
}

TEST(Pipeline, TamperedTranscriptIsDetected) {
  testing::TempDir dir;
  SmallWorld w;
  auto report = run_pipeline(small_config(dir.path()), w.victims, w.model, w.net, w.styles);
  const auto t = dir.path() / "videos" / report.rows[0].video_id / "transcript.jsonl";
  auto text = slurp(t);
  text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);  // drop the last event
  std::ofstream(t, std::ios::binary | std::ios::trunc) << text;
  EXPECT_THROW(evaluate_run_dir(dir.path()), ValidationError);
}

TEST(Pipeline, ModuleFailureBecomesErrorRowAndBatchContinues) {
  testing::TempDir dir;
  SmallWorld w;
  SeededRng rng(134);
  std::vector<LabeledVideo> clips{{"odd", 0, testing::random_video(rng, 16, 16, 16)},
                                  w.victims[0]};
  auto cfg = small_config(dir.path());
  auto report = run_pipeline(cfg, clips, w.model, w.net, w.styles);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].outcome, "error");
  EXPECT_FALSE(report.videos[0].error.empty());
  EXPECT_NE(report.rows[1].outcome, "error");
}

TEST(Pipeline, UnreachableClassifierAbortsBeforeOutput) {
  testing::TempDir dir;
  RunConfig cfg;
  cfg.mode = AttackMode::kTargeted;
  cfg.classifier = "tcp://127.0.0.1:1";
  cfg.videos = dir / "videos";
  cfg.style_set = dir / "styles";
  cfg.weights = dir / "w.fwf";
  cfg.output = dir / "out";
  EXPECT_THROW(run_pipeline(cfg), ConfigError);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

fs::path asset(const std::string& name) { return fs::path(STYLEFOOL_ASSETS_DIR) / name; }

TEST(SampleRun, EvaluateReproducesGoldenCsv) {
  ASSERT_TRUE(fs::exists(asset("sample_run/run.json")));
  EXPECT_EQ(format_report_csv(evaluate_run_dir(asset("sample_run"))),
            slurp(asset("sample_report.csv")));
}

TEST(SampleRun, CliEvalReproducesGoldenCsv) {
  const std::string cli = STYLEFOOL_CLI_PATH;
  if (cli.empty()) GTEST_SKIP() << "command-line tool not built";
  testing::TempDir dir;
  const std::string cmd = "'" + cli + "' eval --run '" + asset("sample_run").string() +
                          "' --out '" + (dir / "r.csv").string() + "' > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(slurp(dir / "r.csv"), slurp(asset("sample_report.csv")));
}

TEST(Cli, ResumeIsRefused) {
  const std::string cli = STYLEFOOL_CLI_PATH;
  if (cli.empty()) GTEST_SKIP() << "command-line tool not built";
  testing::TempDir dir;
  const std::string cmd = "'" + cli + "' attack --stylized x.vtf --classifier toy:m.tcw --out '" +
                          (dir / "a.vtf").string() + "' --resume transcript.jsonl 2> /dev/null";
  const int status = std::system(cmd.c_str());
  EXPECT_NE(status, 0);
  EXPECT_FALSE(fs::exists(dir / "a.vtf"));
}

TEST(Dataset, RoundTrip) {
  testing::TempDir dir;
  SeededRng rng(135);
  auto data = synth_dataset(rng, 1, "d");
  save_dataset(data, dir.path());
  auto back = load_dataset(dir.path());
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].id, data[i].id);
    EXPECT_EQ(back[i].label, data[i].label);
    EXPECT_EQ(back[i].video, data[i].video);
  }
}

}  // namespace
}  // namespace stylefool
