#include "stylefool/color_themes.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <nlohmann/json.hpp>

#include "stylefool/error.hpp"

namespace stylefool {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Bucket {
  std::vector<int> pixels;  // indices into the pixel array
};

double channel_range(const std::vector<Rgb>& px, const Bucket& b, int c) {
  double lo = px[b.pixels.front()][c], hi = lo;
  for (int i : b.pixels) {
    lo = std::min(lo, px[i][c]);
    hi = std::max(hi, px[i][c]);
  }
  return hi - lo;
}

/// Widest channel of a bucket and its range; strict > keeps the R,G,B tie order.
std::pair<int, double> widest_channel(const std::vector<Rgb>& px, const Bucket& b) {
  int best = 0;
  double best_range = channel_range(px, b, 0);
  for (int c = 1; c < 3; ++c) {
    const double r = channel_range(px, b, c);
    if (r > best_range) {
      best = c;
      best_range = r;
    }
  }
  return {best, best_range};
}

std::pair<Bucket, Bucket> split(const std::vector<Rgb>& px, Bucket b) {
  const int c = widest_channel(px, b).first;
  std::stable_sort(b.pixels.begin(), b.pixels.end(),
                   [&](int i, int j) { return px[i][c] < px[j][c]; });
  const auto half = static_cast<std::ptrdiff_t>(b.pixels.size() / 2);
  Bucket lower{{b.pixels.begin(), b.pixels.begin() + half}};
  Bucket upper{{b.pixels.begin() + half, b.pixels.end()}};
  return {std::move(lower), std::move(upper)};
}

Rgb bucket_median(const std::vector<Rgb>& px, const Bucket& b) {
  Rgb out{};
  std::vector<double> values(b.pixels.size());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < b.pixels.size(); ++k) values[k] = px[b.pixels[k]][c];
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    out[c] = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  }
  return out;
}

}  // namespace

Hsv rgb_to_hsv(const Rgb& rgb) {
  const double r = rgb[0], g = rgb[1], b = rgb[2];
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r) {
      h = 60.0 * std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / delta + 2.0);
    } else {
      h = 60.0 * ((r - g) / delta + 4.0);
    }
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
  }
  const double s = mx > 0.0 ? delta / mx : 0.0;
  return {h, s, mx};
}

Rgb hsv_to_rgb(const Hsv& hsv) {
  const double h = hsv[0], s = hsv[1], v = hsv[2];
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

Xyz hsv_to_xyz(const Hsv& hsv, double radius, double height) {
  const double rho = radius * hsv[2] * hsv[1];
  const double angle = hsv[0] * kDegToRad;
  return {rho * std::cos(angle), rho * std::sin(angle), height * (1.0 - hsv[2])};
}

ColorTheme make_theme(const Rgb& rgb, const ConeGeometry& cone) {
  ColorTheme t;
  t.rgb = rgb;
  t.hsv = rgb_to_hsv(rgb);
  t.xyz = hsv_to_xyz(t.hsv, cone);
  return t;
}

std::vector<Rgb> median_cut(const ImageTensor& image, int m) {
  std::vector<int> unused;
  return median_cut(image, m, unused);
}

std::vector<Rgb> median_cut(const ImageTensor& image, int m, std::vector<int>& assignment) {
  if (m < 1) throw ValidationError("median_cut needs m >= 1");
  if (image.empty()) throw ValidationError("median_cut needs a nonempty image");
  if (image.channels() != 3) throw ValidationError("median_cut needs an RGB image");
  const auto n = static_cast<int>(image.size() / 3);
  if (m > n) {
    throw ValidationError("median_cut: m=" + std::to_string(m) + " exceeds pixel count " +
                          std::to_string(n));
  }
  std::vector<Rgb> px(static_cast<std::size_t>(n));
  auto data = image.data();
  for (int i = 0; i < n; ++i) px[i] = {data[3 * i], data[3 * i + 1], data[3 * i + 2]};

  std::vector<Bucket> buckets(1);
  buckets[0].pixels.resize(static_cast<std::size_t>(n));
  std::iota(buckets[0].pixels.begin(), buckets[0].pixels.end(), 0);

  // Full halving levels.
  while (static_cast<int>(buckets.size()) * 2 <= m) {
    std::vector<Bucket> next;
    next.reserve(buckets.size() * 2);
    for (auto& b : buckets) {
      auto [lo, hi] = split(px, std::move(b));
      next.push_back(std::move(lo));
      next.push_back(std::move(hi));
    }
    buckets = std::move(next);
  }
  // Remainder: widest bucket first, earliest bucket on ties.
  while (static_cast<int>(buckets.size()) < m) {
    std::size_t pick = buckets.size();
    double widest = -1.0;
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      if (buckets[i].pixels.size() < 2) continue;
      const double r = widest_channel(px, buckets[i]).second;
      if (r > widest) {
        widest = r;
        pick = i;
      }
    }
    auto [lo, hi] = split(px, std::move(buckets[pick]));
    buckets[pick] = std::move(lo);
    buckets.insert(buckets.begin() + static_cast<std::ptrdiff_t>(pick) + 1, std::move(hi));
  }

  assignment.assign(static_cast<std::size_t>(n), -1);
  std::vector<Rgb> out;
  out.reserve(buckets.size());
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    for (int i : buckets[k].pixels) assignment[i] = static_cast<int>(k);
    out.push_back(bucket_median(px, buckets[k]));
  }
  return out;
}

ThemeSet extract_themes(const ImageTensor& image, int count, std::string source,
                        const ConeGeometry& cone) {
  ThemeSet set;
  set.source = std::move(source);
  for (const auto& rgb : median_cut(image, count)) set.themes.push_back(make_theme(rgb, cone));
  return set;
}

ThemeSet extract_themes(const VideoTensor& video, int count, std::string source,
                        const ConeGeometry& cone) {
  if (count < 1) throw ValidationError("theme count must be >= 1");
  return extract_themes(video.frame(0), count, std::move(source), cone);
}

double color_proximity(const ThemeSet& a, const ThemeSet& b) {
  if (a.size() != b.size()) {
    throw ValidationError("theme sets differ in size: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  double total = 0.0;
  for (const auto& ta : a.themes) {
    for (const auto& tb : b.themes) {
      const double dx = ta.xyz[0] - tb.xyz[0];
      const double dy = ta.xyz[1] - tb.xyz[1];
      const double dz = ta.xyz[2] - tb.xyz[2];
      total += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  }
  return total;
}

void write_theme_cache(const std::vector<ThemeSet>& sets, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write theme cache '" + path.string() + "'");
  for (const auto& set : sets) {
    nlohmann::json j;
    j["source"] = set.source;
    j["themes"] = nlohmann::json::array();
    j["xyz"] = nlohmann::json::array();
    for (const auto& t : set.themes) {
      j["themes"].push_back(t.hsv);
      j["xyz"].push_back(t.xyz);
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write to theme cache '" + path.string() + "' failed");
}

std::vector<ThemeSet> read_theme_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read theme cache '" + path.string() + "'");
  std::vector<ThemeSet> sets;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ThemeSet set;
      set.source = j.at("source").get<std::string>();
      const auto hsvs = j.at("themes").get<std::vector<Hsv>>();
      const auto xyzs = j.at("xyz").get<std::vector<Xyz>>();
      if (hsvs.size() != xyzs.size()) throw FormatError("themes/xyz length mismatch");
      for (std::size_t i = 0; i < hsvs.size(); ++i) {
        ColorTheme t;
        t.hsv = hsvs[i];
        t.rgb = hsv_to_rgb(hsvs[i]);
        t.xyz = xyzs[i];
        set.themes.push_back(t);
      }
      sets.push_back(std::move(set));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("theme cache '" + path.string() + "': " + e.what());
    }
  }
  return sets;
}

}  // namespace stylefool
