#pragma once

#include <filesystem>
#include <vector>

#include "stylefool/nn.hpp"
#include "stylefool/tensor.hpp"

namespace stylefool {

/// Dense displacement field with an occlusion mask.
///
/// For a field estimated from (a, b), a(p) ~ b(p + d(p)); mask(p) is 1 where the
/// forward and backward estimates agree and 0 where p is treated as occluded.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> displacement;  // (dx, dy) per pixel, row-major
  std::vector<float> mask;          // 0 or 1 per pixel

  FlowField() = default;
  /// Zero flow with a full mask.
  FlowField(int h, int w)
      : height(h), width(w), displacement(std::size_t(h) * w * 2, 0.0f),
        mask(std::size_t(h) * w, 1.0f) {}

  float dx(int y, int x) const noexcept { return displacement[(std::size_t(y) * width + x) * 2]; }
  float dy(int y, int x) const noexcept {
    return displacement[(std::size_t(y) * width + x) * 2 + 1];
  }
  bool operator==(const FlowField&) const = default;
};

struct BlockMatchParams {
  int patch = 8;
  int search_radius = 4;
  /// Forward-backward disagreement (pixels) above which a pixel is masked out.
  double occlusion_threshold = 1.0;
};

/// Integer block-matching flow from `a` to `b` (sum of squared differences over
/// a patch centred on each pixel, edge-clamped) plus a forward-backward
/// consistency mask.
FlowField estimate_flow(const ImageTensor& a, const ImageTensor& b,
                        const BlockMatchParams& params = {});

/// Samples `frame` at (x + dx, y + dy) bilinearly, clamping coordinates to the border.
ImageTensor warp(const ImageTensor& frame, const FlowField& flow);

template <typename T>
nn::Grid<T> warp(const nn::Grid<T>& frame, const FlowField& flow);

/// Adjoint of warp(): scatters `grad` back onto the source grid.
template <typename T>
nn::Grid<T> warp_transpose(const nn::Grid<T>& grad, const FlowField& flow);

/// FLO1: "FLO1", u32 LE H, W, H*W (dx,dy) f32 LE, then H*W mask f32 LE.
FlowField read_flow(const std::filesystem::path& path);
void write_flow(const FlowField& flow, const std::filesystem::path& path);

}  // namespace stylefool
