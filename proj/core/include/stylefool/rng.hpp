#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace stylefool {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
/// Exposed for the known-answer tests in docs/rng.md.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Deterministic counter-based random stream.
///
/// The 64-bit seed is the Philox key; the 64-bit stream id fills the upper half
/// of the counter and a 64-bit block index the lower half. Every derived value
/// (uniforms, integers, shuffles) is built from the raw 32-bit words with
/// integer arithmetic, so a given (seed, stream) pair replays identically on
/// every host. Normals additionally depend on the platform's log/sin/cos.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  /// Uniform double in [0,1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via the Box-Muller transform.
  double normal() noexcept;
  /// Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int cursor_ = 4;
  std::optional<double> spare_normal_;
};

}  // namespace stylefool
