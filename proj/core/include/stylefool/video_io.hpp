#pragma once

#include <filesystem>

#include "stylefool/tensor.hpp"

namespace stylefool {

/// Reads a VTF1 file: "VTF1", T/H/W/C as u32 LE, then T*H*W*C f32 LE.
VideoTensor read_vtf(const std::filesystem::path& path);
void write_vtf(const VideoTensor& video, const std::filesystem::path& path);

/// Loads every *.png in `dir`, in lexicographic filename order, as one frame.
/// Byte value v becomes v/255.
VideoTensor frames_from_pngs(const std::filesystem::path& dir);

/// Writes frame t to `dir`/frame_%04d.png at 8-bit depth (rounded to nearest).
void frames_to_pngs(const VideoTensor& video, const std::filesystem::path& dir);

}  // namespace stylefool
