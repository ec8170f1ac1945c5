#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stylefool/tensor.hpp"

namespace stylefool {

/// Stabiliser added to the MSE so identical clips give a finite PSNR.
inline constexpr double kPsnrAlpha = 1e-5;

struct AttackRecord {
  std::string video_id;
  std::string mode;  // "targeted" or "untargeted"
  bool success = false;
  std::uint64_t queries = 0;
};

struct AttackStats {
  double asr = 0.0;
  std::size_t successes = 0;
  std::size_t total = 0;
  /// Over successful records only; absent when nothing succeeded.
  std::optional<std::uint64_t> min_queries;
  std::optional<std::uint64_t> max_queries;
  std::optional<double> avg_queries;
};

AttackStats attack_stats(const std::vector<AttackRecord>& records);

struct QualityReport {
  double value = 0.0;  // mean of per_frame
  std::vector<double> per_frame;
};

/// 10 log10(255^2 / (MSE + alpha)) per frame on the 0..255 scale, averaged over frames.
QualityReport psnr_report(const VideoTensor& a, const VideoTensor& b, double alpha = kPsnrAlpha);
/// SSIM with an 8x8 uniform window (valid positions only), C1 = (0.01*255)^2 and
/// C2 = (0.03*255)^2 on the 0..255 scale; channel-averaged, then frame-averaged.
QualityReport ssim_report(const VideoTensor& a, const VideoTensor& b);

inline double psnr(const VideoTensor& a, const VideoTensor& b) { return psnr_report(a, b).value; }
inline double ssim(const VideoTensor& a, const VideoTensor& b) { return ssim_report(a, b).value; }

/// One line of the attack report.
struct ReportRow {
  std::string video_id;
  std::string mode;
  std::string outcome;  // "success", "failure" or "error"
  std::uint64_t queries = 0;
  std::optional<double> ssim_ori_adv;
  std::optional<double> ssim_sty_adv;
  std::optional<double> psnr_ori_adv;
  std::optional<double> psnr_sty_adv;
};

/// Fills the four quality columns from the clean, stylized and adversarial clips.
void fill_quality(ReportRow& row, const VideoTensor& original, const VideoTensor& stylized,
                  const VideoTensor& adversarial);

/// CSV with header video_id,mode,outcome,queries,ssim_ori_adv,ssim_sty_adv,psnr_ori_adv,psnr_sty_adv.
/// Metrics are printed with six decimals; missing values are left empty.
std::string format_report_csv(const std::vector<ReportRow>& rows);
void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path);

}  // namespace stylefool
