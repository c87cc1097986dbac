#include "sshlab/rng.hpp"

namespace sshlab {

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) noexcept : inc_((stream << 1U) | 1U) {
  (*this)();
  state_ += seed;
  (*this)();
}

Pcg32::result_type Pcg32::operator()() noexcept {
  const std::uint64_t old = state_;
  state_ = old * 6364136223846793005ULL + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
  const auto rot = static_cast<std::uint32_t>(old >> 59U);
  return (xorshifted >> rot) | (xorshifted << ((-rot) & 31U));
}

double Pcg32::uniform01() noexcept {
  const std::uint64_t hi = (*this)();
  const std::uint64_t lo = (*this)();
  return static_cast<double>(((hi << 32U) | lo) >> 11U) * 0x1.0p-53;
}

std::uint32_t Pcg32::bounded(std::uint32_t bound) noexcept {
  const std::uint32_t threshold = (-bound) % bound;
  for (;;) {
    const std::uint32_t r = (*this)();
    if (r >= threshold) return r % bound;
  }
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(a) ^ b);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
  return splitmix64(mix_seed(a, b) ^ c);
}

}  // namespace sshlab
