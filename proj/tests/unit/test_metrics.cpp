#include <gtest/gtest.h>

#include <cmath>

#include "stylefool/blackbox_attack.hpp"
#include "stylefool/error.hpp"
#include "stylefool/metrics.hpp"
#include "test_support.hpp"

namespace stylefool {
namespace {

AttackRecord rec(bool success, std::uint64_t q) { return {"v", "untargeted", success, q}; }

VideoTensor checkerboard(int t, int n, int cell) {
  std::vector<float> d;
  for (int f = 0; f < t; ++f)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const float v = ((x / cell + y / cell + f) % 2) ? 0.95f : 0.05f;
        d.insert(d.end(), {v, v, v});
      }
  return VideoTensor(t, n, n, 3, std::move(d));
}

VideoTensor inverted(const VideoTensor& v) {
  std::vector<float> d(v.data().begin(), v.data().end());
  for (auto& x : d) x = 1.0f - x;
  return VideoTensor(v.frames(), v.height(), v.width(), v.channels(), std::move(d));
}

TEST(AttackStats, HandArithmetic) {
  auto a = attack_stats({rec(true, 1), rec(true, 5)});
  EXPECT_EQ(a.asr, 1.0);
  EXPECT_EQ(*a.min_queries, 1u);
  EXPECT_EQ(*a.max_queries, 5u);
  EXPECT_EQ(*a.avg_queries, 3.0);

  auto b = attack_stats({rec(true, 100), rec(false, 300000)});
  EXPECT_EQ(b.asr, 0.5);
  EXPECT_EQ(b.successes, 1u);
  EXPECT_EQ(b.total, 2u);
  EXPECT_EQ(*b.min_queries, 100u);
  EXPECT_EQ(*b.max_queries, 100u);
  EXPECT_EQ(*b.avg_queries, 100.0);

  auto c = attack_stats({rec(false, 7), rec(false, 9)});
  EXPECT_EQ(c.asr, 0.0);
  EXPECT_FALSE(c.min_queries);
  EXPECT_FALSE(c.max_queries);
  EXPECT_FALSE(c.avg_queries);

  EXPECT_THROW(attack_stats({}), ValidationError);
}

TEST(AttackStats, OrderInvariant) {
  std::vector<AttackRecord> r{rec(true, 10), rec(false, 3), rec(true, 2), rec(true, 40)};
  auto a = attack_stats(r);
  std::reverse(r.begin(), r.end());
  auto b = attack_stats(r);
  EXPECT_EQ(a.asr, b.asr);
  EXPECT_EQ(a.min_queries, b.min_queries);
  EXPECT_EQ(a.avg_queries, b.avg_queries);
}

TEST(Psnr, IdenticalClips) {
  SeededRng rng(121);
  auto v = testing::random_video(rng, 4, 8, 8);
  EXPECT_NEAR(psnr(v, v), 10 * std::log10(65025.0 / 1e-5), 1e-12);
  EXPECT_NEAR(psnr(v, v), 98.1311, 0.001);
}

TEST(Psnr, OneLevelOffset) {
  auto a = testing::constant_video(3, 8, 8, 3, 0.2f);
  auto b = testing::constant_video(3, 8, 8, 3, 0.2f + 1.0f / 255.0f);
  EXPECT_NEAR(psnr(a, b), 48.13, 0.005);
}

TEST(Psnr, MonotoneAndFrameMean) {
  SeededRng rng(122);
  auto a = testing::random_video(rng, 3, 8, 8);
  auto near = project(testing::random_video(rng, 3, 8, 8), a, 0.01);
  auto far = project(testing::random_video(rng, 3, 8, 8), a, 0.2);
  EXPECT_GT(psnr(a, near), psnr(a, far));
  auto rep = psnr_report(a, far);
  ASSERT_EQ(rep.per_frame.size(), 3u);
  EXPECT_EQ(rep.value, (rep.per_frame[0] + rep.per_frame[1] + rep.per_frame[2]) / 3);
  EXPECT_THROW(psnr(a, testing::random_video(rng, 2, 8, 8)), ValidationError);
}

TEST(Ssim, IdenticalIsExactlyOne) {
  SeededRng rng(123);
  auto v = testing::random_video(rng, 2, 16, 16);
  EXPECT_EQ(ssim(v, v), 1.0);
  auto flat = testing::constant_video(2, 8, 8, 3, 0.4f);
  EXPECT_EQ(ssim(flat, flat), 1.0);
}

TEST(Ssim, InvertedPatternScoresLow) {
  auto a = checkerboard(2, 16, 2);
  EXPECT_LT(ssim(a, inverted(a)), 0.5);
}

TEST(Ssim, SymmetricAndBounded) {
  SeededRng rng(124);
  auto a = testing::random_video(rng, 2, 12, 12);
  auto b = testing::random_video(rng, 2, 12, 12);
  EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
  EXPECT_LE(ssim(a, b), 1.0);
  EXPECT_GE(ssim(a, b), -1.0);
  EXPECT_THROW(ssim(a, testing::random_video(rng, 2, 12, 11)), ValidationError);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  SeededRng rng(125);
  auto a = testing::random_video(rng, 1, 9, 10, 1);
  auto b = testing::random_video(rng, 1, 9, 10, 1);
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double total = 0;
  int windows = 0;
  for (int y0 = 0; y0 + 8 <= 9; ++y0)
    for (int x0 = 0; x0 + 8 <= 10; ++x0) {
      double ma = 0, mb = 0;
      for (int y = y0; y < y0 + 8; ++y)
        for (int x = x0; x < x0 + 8; ++x) {
          ma += 255.0 * a.data()[y * 10 + x];
          mb += 255.0 * b.data()[y * 10 + x];
        }
      ma /= 64;
      mb /= 64;
      double va = 0, vb = 0, cov = 0;
      for (int y = y0; y < y0 + 8; ++y)
        for (int x = x0; x < x0 + 8; ++x) {
          const double da = 255.0 * a.data()[y * 10 + x] - ma;
          const double db = 255.0 * b.data()[y * 10 + x] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= 64;
      vb /= 64;
      cov /= 64;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  EXPECT_NEAR(ssim(a, b), total / windows, 1e-9);
}

TEST(ReportCsv, FormatAndMissingValues) {
  ReportRow ok{"clip1", "untargeted", "success", 42, 0.5, 0.25, 30.0, 40.123456789};
  ReportRow err{"clip2", "targeted", "error", 0, {}, {}, {}, {}};
  EXPECT_EQ(format_report_csv({ok, err}),
            "video_id,mode,outcome,queries,ssim_ori_adv,ssim_sty_adv,psnr_ori_adv,psnr_sty_adv\n"
            "clip1,untargeted,success,42,0.500000,0.250000,30.000000,40.123457\n"
            "clip2,targeted,error,0,,,,\n");
  ReportRow bad{"a,b", "untargeted", "success", 1, {}, {}, {}, {}};
  EXPECT_THROW(format_report_csv({bad}), ValidationError);
}

TEST(ReportCsv, FillQuality) {
  SeededRng rng(126);
  auto ori = testing::random_video(rng, 2, 8, 8);
  auto sty = testing::random_video(rng, 2, 8, 8);
  auto adv = project(testing::random_video(rng, 2, 8, 8), sty, 0.05);
  ReportRow row;
  fill_quality(row, ori, sty, adv);
  EXPECT_DOUBLE_EQ(*row.ssim_ori_adv, ssim(ori, adv));
  EXPECT_DOUBLE_EQ(*row.ssim_sty_adv, ssim(sty, adv));
  EXPECT_DOUBLE_EQ(*row.psnr_ori_adv, psnr(ori, adv));
  EXPECT_DOUBLE_EQ(*row.psnr_sty_adv, psnr(sty, adv));
}

}  // namespace
}  // namespace stylefool
