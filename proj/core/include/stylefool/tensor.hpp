#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stylefool {

/// Frame count every attack pipeline works with.
inline constexpr int kClipFrames = 16;

/// A single H x W x C image, row-major with interleaved channels, values in [0,1].
class ImageTensor {
 public:
  ImageTensor() = default;
  /// Zero image.
  ImageTensor(int height, int width, int channels);
  /// Validates dimensions, payload length and the [0,1] range.
  ImageTensor(int height, int width, int channels, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  float at(int y, int x, int c) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  bool operator==(const ImageTensor&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// T x H x W x C clip: time-major, then rows, then columns, channels interleaved.
class VideoTensor {
 public:
  VideoTensor() = default;
  VideoTensor(int frames, int height, int width, int channels);
  VideoTensor(int frames, int height, int width, int channels, std::vector<float> data);

  /// Stacks equally sized frames.
  static VideoTensor from_frames(std::span<const ImageTensor> frames);

  int frames() const noexcept { return frames_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t frame_size() const noexcept {
    return static_cast<std::size_t>(height_) * width_ * channels_;
  }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> frame_data(int t) const noexcept {
    return std::span<const float>(data_).subspan(t * frame_size(), frame_size());
  }
  ImageTensor frame(int t) const;
  /// First `count` frames.
  VideoTensor head(int count) const;

  bool same_shape(const VideoTensor& other) const noexcept {
    return frames_ == other.frames_ && height_ == other.height_ &&
           width_ == other.width_ && channels_ == other.channels_;
  }
  std::string shape_string() const;

  bool operator==(const VideoTensor&) const = default;

 private:
  int frames_ = 0;
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Clamps every scalar into [0,1]; used when building tensors from unconstrained buffers.
std::vector<float> clamp_unit(std::vector<float> values);

/// Largest absolute element-wise difference.
double linf_distance(const VideoTensor& a, const VideoTensor& b);

}  // namespace stylefool
