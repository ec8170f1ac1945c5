#pragma once

// Little-endian readers and writers shared by the VTF, FWF, FLO1 and TCW1 codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stylefool/error.hpp"

namespace stylefool::detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }

  void magic(std::string_view m) { raw(m.data(), m.size()); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) {
    v = to_le(v);
    raw(&v, 4);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    u32(static_cast<std::uint32_t>(bits));
    u32(static_cast<std::uint32_t>(bits >> 32));
  }
  void f64s(std::span<const double> values) {
    for (double v : values) f64(v);
  }
  void f32s(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      raw(values.data(), values.size_bytes());
    } else {
      for (float v : values) f32(v);
    }
  }
  void bytes(std::string_view s) { raw(s.data(), s.size()); }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("write to '" + path_ + "' failed");
    out_.close();
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write to '" + path_ + "' failed");
  }

  std::string path_;
  std::ofstream out_;
};

/// Reads a whole file into memory and decodes fields from it.
class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::string& path() const { return path_; }

  /// Fails with FormatError if the next bytes differ from `expected`.
  void expect_magic(std::string_view expected) {
    if (remaining() < expected.size() ||
        std::memcmp(buf_.data() + pos_, expected.data(), expected.size()) != 0) {
      throw FormatError("'" + path_ + "' does not start with magic \"" +
                        std::string(expected) + "\"");
    }
    pos_ += expected.size();
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf_.data() + pos_, 4);
    pos_ += 4;
    return to_le(v);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return std::bit_cast<double>((hi << 32) | lo);
  }
  void f64s(std::span<double> out) {
    need(out.size() * 8);
    for (auto& v : out) v = f64();
  }
  void f32s(std::span<float> out) {
    need(out.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), buf_.data() + pos_, out.size() * 4);
      pos_ += out.size() * 4;
    } else {
      for (auto& v : out) v = f32();
    }
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("'" + path_ + "' is truncated");
  }

  std::string path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace stylefool::detail
