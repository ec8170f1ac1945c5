#include "stylefool/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stylefool/error.hpp"

namespace stylefool {
namespace {

void check_range(std::span<const float> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = data[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      std::ostringstream msg;
      msg << "scalar at index " << i << " is " << v << ", outside [0,1]";
      throw ValidationError(msg.str());
    }
  }
}

}  // namespace

ImageTensor::ImageTensor(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ValidationError("image dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0f);
}

ImageTensor::ImageTensor(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ValidationError("image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ValidationError("image payload length does not match H*W*C");
  }
  check_range(data_);
}

VideoTensor::VideoTensor(int frames, int height, int width, int channels)
    : frames_(frames), height_(height), width_(width), channels_(channels) {
  if (frames < 1 || height < 1 || width < 1 || channels < 1) {
    throw ValidationError("video dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(frames) * frame_size(), 0.0f);
}

VideoTensor::VideoTensor(int frames, int height, int width, int channels,
                         std::vector<float> data)
    : frames_(frames), height_(height), width_(width), channels_(channels),
      data_(std::move(data)) {
  if (frames < 1 || height < 1 || width < 1 || channels < 1) {
    throw ValidationError("video dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(frames) * frame_size()) {
    throw ValidationError("video payload length does not match T*H*W*C");
  }
  check_range(data_);
}

VideoTensor VideoTensor::from_frames(std::span<const ImageTensor> frames) {
  if (frames.empty()) throw ValidationError("cannot build a video from zero frames");
  const auto& first = frames.front();
  std::vector<float> data;
  data.reserve(frames.size() * first.size());
  for (const auto& f : frames) {
    if (f.height() != first.height() || f.width() != first.width() ||
        f.channels() != first.channels()) {
      throw ValidationError("frames have inconsistent sizes");
    }
    data.insert(data.end(), f.data().begin(), f.data().end());
  }
  return VideoTensor(static_cast<int>(frames.size()), first.height(), first.width(),
                     first.channels(), std::move(data));
}

ImageTensor VideoTensor::frame(int t) const {
  if (t < 0 || t >= frames_) throw ValidationError("frame index out of range");
  auto span = frame_data(t);
  return ImageTensor(height_, width_, channels_, std::vector<float>(span.begin(), span.end()));
}

VideoTensor VideoTensor::head(int count) const {
  if (count < 1 || count > frames_) {
    throw ValidationError("requested " + std::to_string(count) + " frames from a clip of " +
                          std::to_string(frames_));
  }
  std::vector<float> data(data_.begin(), data_.begin() + count * frame_size());
  return VideoTensor(count, height_, width_, channels_, std::move(data));
}

std::string VideoTensor::shape_string() const {
  std::ostringstream s;
  s << frames_ << "x" << height_ << "x" << width_ << "x" << channels_;
  return s.str();
}

std::vector<float> clamp_unit(std::vector<float> values) {
  for (auto& v : values) v = std::clamp(v, 0.0f, 1.0f);
  return values;
}

double linf_distance(const VideoTensor& a, const VideoTensor& b) {
  if (!a.same_shape(b)) throw ValidationError("shape mismatch in linf_distance");
  double m = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(da[i]) - static_cast<double>(db[i])));
  }
  return m;
}

}  // namespace stylefool
