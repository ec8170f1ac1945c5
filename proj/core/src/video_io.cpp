#include "stylefool/video_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "binary_io.hpp"
#include "stylefool/error.hpp"

namespace stylefool {

namespace fs = std::filesystem;

VideoTensor read_vtf(const fs::path& path) {
  detail::BinaryReader in(path.string());
  in.expect_magic("VTF1");
  if (in.remaining() < 16) throw CorruptFileError("'" + path.string() + "': header truncated");
  const std::uint32_t t = in.u32(), h = in.u32(), w = in.u32(), c = in.u32();
  const std::uint64_t count = std::uint64_t{t} * h * w * c;
  if (t == 0 || h == 0 || w == 0 || c == 0) {
    throw CorruptFileError("'" + path.string() + "': zero dimension in header");
  }
  if (in.remaining() != count * 4) {
    std::ostringstream msg;
    msg << "'" << path.string() << "': header declares " << count << " scalars but payload has "
        << in.remaining() << " bytes";
    throw CorruptFileError(msg.str());
  }
  std::vector<float> data(count);
  in.f32s(data);
  return VideoTensor(static_cast<int>(t), static_cast<int>(h), static_cast<int>(w),
                     static_cast<int>(c), std::move(data));
}

void write_vtf(const VideoTensor& video, const fs::path& path) {
  detail::BinaryWriter out(path.string());
  out.magic("VTF1");
  out.u32(static_cast<std::uint32_t>(video.frames()));
  out.u32(static_cast<std::uint32_t>(video.height()));
  out.u32(static_cast<std::uint32_t>(video.width()));
  out.u32(static_cast<std::uint32_t>(video.channels()));
  out.f32s(video.data());
  out.finish();
}

VideoTensor frames_from_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) throw ValidationError("'" + dir.string() + "' contains no PNG frames");
  std::sort(files.begin(), files.end());

  std::vector<ImageTensor> frames;
  frames.reserve(files.size());
  for (const auto& file : files) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, file.c_str())) {
      throw IoError("cannot decode '" + file.string() + "': " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> bytes(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
      png_image_free(&image);
      throw IoError("cannot decode '" + file.string() + "': " + image.message);
    }
    if (!frames.empty() && (static_cast<int>(image.width) != frames.front().width() ||
                            static_cast<int>(image.height) != frames.front().height())) {
      throw ValidationError("'" + file.string() + "' differs in size from the first frame");
    }
    std::vector<float> data(bytes.size());
    std::transform(bytes.begin(), bytes.end(), data.begin(),
                   [](png_byte b) { return static_cast<float>(b) / 255.0f; });
    frames.emplace_back(static_cast<int>(image.height), static_cast<int>(image.width), 3,
                        std::move(data));
  }
  return VideoTensor::from_frames(frames);
}

void frames_to_pngs(const VideoTensor& video, const fs::path& dir) {
  if (video.channels() != 3) throw ValidationError("PNG export needs 3-channel video");
  fs::create_directories(dir);
  for (int t = 0; t < video.frames(); ++t) {
    auto span = video.frame_data(t);
    std::vector<png_byte> bytes(span.size());
    std::transform(span.begin(), span.end(), bytes.begin(), [](float v) {
      return static_cast<png_byte>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    });
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(video.width());
    image.height = static_cast<png_uint_32>(video.height());
    image.format = PNG_FORMAT_RGB;
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.png", t);
    const auto file = dir / name;
    if (!png_image_write_to_file(&image, file.c_str(), 0, bytes.data(), 0, nullptr)) {
      throw IoError("cannot write '" + file.string() + "': " + image.message);
    }
  }
}

}  // namespace stylefool
