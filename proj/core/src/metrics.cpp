#include "stylefool/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "stylefool/error.hpp"

namespace stylefool {

AttackStats attack_stats(const std::vector<AttackRecord>& records) {
  if (records.empty()) throw ValidationError("attack_stats needs at least one record");
  AttackStats s;
  s.total = records.size();
  std::uint64_t sum = 0;
  for (const auto& r : records) {
    if (!r.success) continue;
    ++s.successes;
    sum += r.queries;
    s.min_queries = s.min_queries ? std::min(*s.min_queries, r.queries) : r.queries;
    s.max_queries = s.max_queries ? std::max(*s.max_queries, r.queries) : r.queries;
  }
  s.asr = static_cast<double>(s.successes) / static_cast<double>(s.total);
  if (s.successes > 0) s.avg_queries = static_cast<double>(sum) / static_cast<double>(s.successes);
  return s;
}

namespace {

void require_same_shape(const VideoTensor& a, const VideoTensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": shape " + a.shape_string() + " vs " +
                          b.shape_string());
  }
  if (a.frames() == 0) throw ValidationError(std::string(what) + ": empty clip");
}

QualityReport mean_of(std::vector<double> per_frame) {
  QualityReport r;
  double sum = 0.0;
  for (double v : per_frame) sum += v;
  r.value = sum / static_cast<double>(per_frame.size());
  r.per_frame = std::move(per_frame);
  return r;
}

constexpr int kSsimWindow = 8;

/// Mean SSIM of one channel over every valid 8x8 window.
double ssim_channel(std::span<const float> a, std::span<const float> b, int h, int w, int channels,
                    int c) {
  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
  const int win_h = std::min(kSsimWindow, h);
  const int win_w = std::min(kSsimWindow, w);
  const double inv_n = 1.0 / (win_h * win_w);
  double total = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + win_h <= h; ++y0) {
    for (int x0 = 0; x0 + win_w <= w; ++x0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = y0; y < y0 + win_h; ++y) {
        for (int x = x0; x < x0 + win_w; ++x) {
          const std::size_t i = (std::size_t(y) * w + x) * channels + c;
          const double va = 255.0 * a[i];
          const double vb = 255.0 * b[i];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      const double ma = sa * inv_n, mb = sb * inv_n;
      const double var_a = saa * inv_n - ma * ma;
      const double var_b = sbb * inv_n - mb * mb;
      const double cov = sab * inv_n - ma * mb;
      total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
      ++windows;
    }
  }
  return total / windows;
}

}  // namespace

QualityReport psnr_report(const VideoTensor& a, const VideoTensor& b, double alpha) {
  require_same_shape(a, b, "psnr");
  std::vector<double> per_frame;
  for (int t = 0; t < a.frames(); ++t) {
    auto fa = a.frame_data(t), fb = b.frame_data(t);
    double sse = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      const double d = 255.0 * (double(fa[i]) - double(fb[i]));
      sse += d * d;
    }
    const double mse = sse / static_cast<double>(fa.size());
    per_frame.push_back(10.0 * std::log10(255.0 * 255.0 / (mse + alpha)));
  }
  return mean_of(std::move(per_frame));
}

QualityReport ssim_report(const VideoTensor& a, const VideoTensor& b) {
  require_same_shape(a, b, "ssim");
  std::vector<double> per_frame;
  for (int t = 0; t < a.frames(); ++t) {
    double sum = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
      sum += ssim_channel(a.frame_data(t), b.frame_data(t), a.height(), a.width(), a.channels(), c);
    }
    per_frame.push_back(sum / a.channels());
  }
  return mean_of(std::move(per_frame));
}

void fill_quality(ReportRow& row, const VideoTensor& original, const VideoTensor& stylized,
                  const VideoTensor& adversarial) {
  row.ssim_ori_adv = ssim(original, adversarial);
  row.ssim_sty_adv = ssim(stylized, adversarial);
  row.psnr_ori_adv = psnr(original, adversarial);
  row.psnr_sty_adv = psnr(stylized, adversarial);
}

std::string format_report_csv(const std::vector<ReportRow>& rows) {
  std::string out =
      "video_id,mode,outcome,queries,ssim_ori_adv,ssim_sty_adv,psnr_ori_adv,psnr_sty_adv\n";
  auto metric = [](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
  };
  for (const auto& r : rows) {
    if (r.video_id.find_first_of(",\"\n") != std::string::npos) {
      throw ValidationError("video id '" + r.video_id + "' cannot be written to CSV");
    }
    out += r.video_id + "," + r.mode + "," + r.outcome + "," + std::to_string(r.queries) + "," +
           metric(r.ssim_ori_adv) + "," + metric(r.ssim_sty_adv) + "," + metric(r.psnr_ori_adv) +
           "," + metric(r.psnr_sty_adv) + "\n";
  }
  return out;
}

void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
  const std::string text = format_report_csv(rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace stylefool
