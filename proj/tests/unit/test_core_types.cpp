#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "stylefool/error.hpp"
#include "stylefool/rng.hpp"
#include "stylefool/tensor.hpp"
#include "stylefool/video_io.hpp"
#include "test_support.hpp"

namespace stylefool {
namespace {

using testing::TempDir;

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

std::vector<std::uint8_t> vtf_bytes(const char* magic, std::array<std::uint32_t, 4> dims,
                                    const std::vector<float>& payload) {
  std::vector<std::uint8_t> out(magic, magic + 4);
  for (auto d : dims) put_u32(out, d);
  for (float f : payload) put_f32(out, f);
  return out;
}

TEST(Philox, KnownAnswerVectors) {
  using W = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}),
            (W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                          {0xffffffff, 0xffffffff}),
            (W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                          {0xa4093822, 0x299f31d0}),
            (W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(SeededRng, FirstWordsComeFromBlockZero) {
  // seed 0, stream 0 reads counter (0,0,0,0) under key (0,0).
  SeededRng rng(0, 0);
  EXPECT_EQ(rng.next_u32(), 0x6627e8d5u);
  EXPECT_EQ(rng.next_u32(), 0xe169c58du);
}

TEST(SeededRng, ReplaysIdentically) {
  SeededRng a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.normal(), b.normal());
    ASSERT_EQ(a.next_u64(), b.next_u64());
  }
}

TEST(SeededRng, StreamsDiffer) {
  SeededRng a(42, 0), b(42, 1);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u32() == b.next_u32();
  EXPECT_LT(equal, 3);
}

TEST(SeededRng, UniformAndNormalMoments) {
  SeededRng rng(1, 2);
  const int n = 200000;
  double sum = 0, sum2 = 0, usum = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    usum += u;
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  EXPECT_NEAR(usum / n, 0.5, 0.005);
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum2 / n, 1.0, 0.02);
}

TEST(SeededRng, BelowAndPermutation) {
  SeededRng rng(9);
  for (int i = 0; i < 1000; ++i) ASSERT_LT(rng.below(7), 7u);
  auto perm = rng.permutation(50);
  std::set<std::size_t> seen(perm.begin(), perm.end());
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_EQ(*seen.rbegin(), 49u);
}

TEST(Tensor, RejectsOutOfRangeScalars) {
  EXPECT_THROW(ImageTensor(1, 1, 3, {0.0f, 1.5f, 0.0f}), ValidationError);
  EXPECT_THROW(VideoTensor(1, 1, 1, 3, {0.0f, -0.1f, 0.0f}), ValidationError);
  EXPECT_THROW(VideoTensor(1, 1, 1, 3, {0.0f, NAN, 0.0f}), ValidationError);
  EXPECT_THROW(VideoTensor(1, 1, 1, 3, {0.0f, 0.5f}), ValidationError);
}

TEST(Tensor, FramesAndHead) {
  SeededRng rng(3);
  auto v = testing::random_video(rng, 4, 2, 3);
  auto f2 = v.frame(2);
  EXPECT_EQ(f2.height(), 2);
  EXPECT_EQ(f2.at(1, 2, 0), v.frame_data(2)[(1 * 3 + 2) * 3]);
  auto h = v.head(2);
  EXPECT_EQ(h.frames(), 2);
  EXPECT_EQ(h.frame(1), v.frame(1));
  EXPECT_THROW(v.head(5), ValidationError);
  std::vector<ImageTensor> frames{v.frame(0), v.frame(1), v.frame(2), v.frame(3)};
  EXPECT_EQ(VideoTensor::from_frames(frames), v);
}

TEST(Vtf, SmallestWellFormedFile) {
  TempDir dir;
  write_bytes(dir / "a.vtf", vtf_bytes("VTF1", {1, 1, 1, 3}, {0.0f, 0.5f, 1.0f}));
  auto v = read_vtf(dir / "a.vtf");
  EXPECT_EQ(v.shape_string(), VideoTensor(1, 1, 1, 3).shape_string());
  EXPECT_EQ(std::vector<float>(v.data().begin(), v.data().end()),
            (std::vector<float>{0.0f, 0.5f, 1.0f}));
}

TEST(Vtf, BadMagicIsFormatError) {
  TempDir dir;
  write_bytes(dir / "a.vtf", vtf_bytes("VTF2", {1, 1, 1, 3}, {0.0f, 0.5f, 1.0f}));
  EXPECT_THROW(read_vtf(dir / "a.vtf"), FormatError);
}

TEST(Vtf, LengthMismatchIsCorrupt) {
  TempDir dir;
  write_bytes(dir / "short.vtf", vtf_bytes("VTF1", {1, 1, 2, 3}, {0.0f, 0.5f, 1.0f}));
  EXPECT_THROW(read_vtf(dir / "short.vtf"), CorruptFileError);
  write_bytes(dir / "long.vtf", vtf_bytes("VTF1", {1, 1, 1, 1}, {0.0f, 0.5f}));
  EXPECT_THROW(read_vtf(dir / "long.vtf"), CorruptFileError);
}

TEST(Vtf, OutOfRangeScalarIsValidationError) {
  TempDir dir;
  write_bytes(dir / "a.vtf", vtf_bytes("VTF1", {1, 1, 1, 3}, {0.0f, 2.0f, 1.0f}));
  try {
    read_vtf(dir / "a.vtf");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find('1'), std::string::npos);
  }
}

TEST(Vtf, ZeroVideoFileSize) {
  TempDir dir;
  write_vtf(VideoTensor(16, 8, 8, 3), dir / "z.vtf");
  EXPECT_EQ(std::filesystem::file_size(dir / "z.vtf"), 12308u);
}

TEST(Vtf, RoundTripIsBitwise) {
  TempDir dir;
  SeededRng rng(20220404, 1);
  auto v = testing::random_video(rng, 16, 32, 32);
  write_vtf(v, dir / "r.vtf");
  auto back = read_vtf(dir / "r.vtf");
  ASSERT_EQ(back.size(), v.size());
  EXPECT_EQ(std::memcmp(back.data().data(), v.data().data(), v.size() * 4), 0);
}

TEST(Vtf, UnwritablePathIsIoError) {
  EXPECT_THROW(write_vtf(VideoTensor(1, 1, 1, 3), "/nonexistent_dir/x/y.vtf"), IoError);
}

TEST(Png, AllWhiteFrame) {
  TempDir dir;
  frames_to_pngs(testing::constant_video(1, 2, 2, 3, 1.0f), dir.path());
  auto v = frames_from_pngs(dir.path());
  EXPECT_EQ(v.frames(), 1);
  for (float f : v.data()) EXPECT_EQ(f, 1.0f);
}

TEST(Png, ByteMapping) {
  TempDir dir;
  frames_to_pngs(testing::constant_video(1, 2, 2, 3, 128.0f / 255.0f), dir.path());
  auto v = frames_from_pngs(dir.path());
  EXPECT_EQ(v.data()[0], 128.0f / 255.0f);
  EXPECT_NEAR(v.data()[0], 0.50196, 1e-5);
}

TEST(Png, SixteenFramesInOrderAndQuantizationFixedPoint) {
  TempDir dir, again;
  SeededRng rng(5);
  auto v = testing::random_video(rng, 16, 32, 32);
  frames_to_pngs(v, dir.path());
  auto loaded = frames_from_pngs(dir.path());
  ASSERT_EQ(loaded.frames(), 16);
  for (std::size_t i = 0; i < v.size(); ++i)
    ASSERT_EQ(loaded.data()[i], std::round(v.data()[i] * 255.0f) / 255.0f);
  frames_to_pngs(loaded, again.path());
  EXPECT_EQ(frames_from_pngs(again.path()), loaded);
}

TEST(Png, EmptyDirectoryIsValidationError) {
  TempDir dir;
  EXPECT_THROW(frames_from_pngs(dir.path()), ValidationError);
}

TEST(Png, InconsistentSizesAreValidationError) {
  TempDir a, b;
  frames_to_pngs(testing::constant_video(1, 2, 2, 3, 0.5f), a.path());
  frames_to_pngs(testing::constant_video(1, 3, 3, 3, 0.5f), b.path());
  std::filesystem::copy_file(b / "frame_0000.png", a / "frame_0001.png");
  EXPECT_THROW(frames_from_pngs(a.path()), ValidationError);
}

}  // namespace
}  // namespace stylefool
