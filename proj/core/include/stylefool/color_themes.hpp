#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "stylefool/tensor.hpp"

namespace stylefool {

using Rgb = std::array<double, 3>;
/// Hue in degrees [0,360), saturation and value in [0,1].
using Hsv = std::array<double, 3>;
using Xyz = std::array<double, 3>;

/// Number of color themes compared between a clip and a style image.
inline constexpr int kDefaultThemeCount = 3;

/// Bottom radius and height of the HSV cone used to embed colors in 3-space.
struct ConeGeometry {
  double radius = 50.0;
  double height = 50.0 * std::numbers::sqrt3;
};

struct ColorTheme {
  Rgb rgb{};
  Hsv hsv{};
  Xyz xyz{};
};

struct ThemeSet {
  std::string source;
  std::vector<ColorTheme> themes;

  std::size_t size() const noexcept { return themes.size(); }
};

/// Hexcone RGB -> HSV.
Hsv rgb_to_hsv(const Rgb& rgb);
Rgb hsv_to_rgb(const Hsv& hsv);

/// X = r V S cos H, Y = r V S sin H, Z = h (1 - V).
Xyz hsv_to_xyz(const Hsv& hsv, double radius, double height);
inline Xyz hsv_to_xyz(const Hsv& hsv, const ConeGeometry& cone = {}) {
  return hsv_to_xyz(hsv, cone.radius, cone.height);
}

ColorTheme make_theme(const Rgb& rgb, const ConeGeometry& cone = {});

/// Median-cut quantization into `m` representative colors.
///
/// Buckets are halved at the median along the channel with the widest value
/// range (ties go to R, then G, then B) for floor(log2 m) full levels; any
/// remaining splits go to the bucket with the widest channel range. Each
/// returned color is the per-channel median of its bucket, with even-sized
/// buckets averaging the two middle values.
std::vector<Rgb> median_cut(const ImageTensor& image, int m);

/// Same as median_cut but also reports which bucket each pixel landed in.
std::vector<Rgb> median_cut(const ImageTensor& image, int m, std::vector<int>& assignment);

ThemeSet extract_themes(const ImageTensor& image, int count, std::string source = {},
                        const ConeGeometry& cone = {});
/// Themes of the clip's first frame.
ThemeSet extract_themes(const VideoTensor& video, int count, std::string source = {},
                        const ConeGeometry& cone = {});

/// Sum of Euclidean distances between every pair of cone embeddings (C^2 terms).
double color_proximity(const ThemeSet& a, const ThemeSet& b);

/// Theme cache: one JSON object per line with "source", "themes" ([[H,S,V]...]) and "xyz".
void write_theme_cache(const std::vector<ThemeSet>& sets, const std::filesystem::path& path);
std::vector<ThemeSet> read_theme_cache(const std::filesystem::path& path);

}  // namespace stylefool
