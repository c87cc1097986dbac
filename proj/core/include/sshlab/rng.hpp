#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace sshlab {

// PCG-XSH-RR 64/32 (O'Neill). Output matches the reference pcg32 stream for
// the same (seed, stream) pair, so datasets can be regenerated elsewhere.
class Pcg32 {
 public:
  using result_type = std::uint32_t;

  explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bULL,
                 std::uint64_t stream = 0xda3e39cb94b95bdbULL) noexcept;

  result_type operator()() noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  // Uniform on [0, 1) with 53 random mantissa bits (two draws).
  double uniform01() noexcept;
  // Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }
  // Uniform on [-0.5, 0.5), the disorder variable distribution.
  double centered() noexcept { return uniform01() - 0.5; }
  // Unbiased integer in [0, bound).
  std::uint32_t bounded(std::uint32_t bound) noexcept;

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Order-dependent combination of seed components.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept;

// Fisher-Yates permutation of 0..n-1 driven by Pcg32.
template <class T>
void shuffle(std::span<T> items, Pcg32& rng) noexcept {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.bounded(static_cast<std::uint32_t>(i)));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace sshlab
