#pragma once

// Minimal convolution toolkit shared by the feature network and the toy
// classifier: 3x3 same-padding convolution, ReLU and 2x2 average pooling on
// H x W x C grids, with hand-written backward passes.

#include <cstddef>
#include <span>
#include <vector>

#include "stylefool/tensor.hpp"

namespace stylefool::nn {

/// Row-major H x W x C activation grid.
template <typename T>
struct Grid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int h, int w, int c) : height(h), width(w), channels(c), data(std::size_t(h) * w * c) {}

  std::size_t pixels() const noexcept { return std::size_t(height) * width; }
  std::size_t size() const noexcept { return data.size(); }
  T& at(int y, int x, int c) noexcept { return data[(std::size_t(y) * width + x) * channels + c]; }
  const T& at(int y, int x, int c) const noexcept {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
  bool same_shape(const Grid& o) const noexcept {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

template <typename T>
Grid<T> to_grid(const ImageTensor& image) {
  Grid<T> g(image.height(), image.width(), image.channels());
  auto d = image.data();
  for (std::size_t i = 0; i < d.size(); ++i) g.data[i] = static_cast<T>(d[i]);
  return g;
}

template <typename T>
Grid<T> to_grid(std::span<const float> data, int h, int w, int c) {
  Grid<T> g(h, w, c);
  for (std::size_t i = 0; i < data.size(); ++i) g.data[i] = static_cast<T>(data[i]);
  return g;
}

/// 3x3 kernel bank. `weights` is stored as (out, in, ky, kx) like the FWF file.
template <typename T>
struct Conv3x3 {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  Conv3x3() = default;
  Conv3x3(int in, int out)
      : in_channels(in), out_channels(out), weights(std::size_t(in) * out * 9), bias(out) {}

  std::size_t weight_index(int o, int i, int ky, int kx) const noexcept {
    return ((std::size_t(o) * in_channels + i) * 3 + ky) * 3 + kx;
  }

  template <typename U>
  Conv3x3<U> cast() const {
    Conv3x3<U> c(in_channels, out_channels);
    for (std::size_t i = 0; i < weights.size(); ++i) c.weights[i] = static_cast<U>(weights[i]);
    for (std::size_t i = 0; i < bias.size(); ++i) c.bias[i] = static_cast<U>(bias[i]);
    return c;
  }
};

/// Zero-padded, stride-1 convolution.
template <typename T>
Grid<T> conv3x3_forward(const Grid<T>& in, const Conv3x3<T>& conv);

/// Gradient of <dout, conv(in)> with respect to `in`.
template <typename T>
Grid<T> conv3x3_backward_input(const Grid<T>& dout, const Conv3x3<T>& conv);

/// Accumulates weight and bias gradients into `grad` (same layout as `conv`).
template <typename T>
void conv3x3_backward_params(const Grid<T>& in, const Grid<T>& dout, Conv3x3<T>& grad);

template <typename T>
Grid<T> relu_forward(Grid<T> in);

/// Masks `dout` where the forward output was not positive.
template <typename T>
Grid<T> relu_backward(const Grid<T>& out, Grid<T> dout);

/// 2x2 mean pooling; odd trailing rows/columns are dropped.
template <typename T>
Grid<T> avgpool2_forward(const Grid<T>& in);

template <typename T>
Grid<T> avgpool2_backward(const Grid<T>& dout, int in_height, int in_width);

}  // namespace stylefool::nn
