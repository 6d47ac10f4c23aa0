#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fieldrate {

// Counter-based normal generator. A draw is a pure function of
// (seed, stream, row, col), so any evaluation order reproduces the same
// matrix. Streams separate independent uses of one root seed (field
// snapshots, test-channel noise, ...).
class CounterNormal {
 public:
  enum Stream : std::uint64_t { kField = 1, kChannelNoise = 2, kJointField = 3 };

  CounterNormal(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed ^ mix(stream * 0xD1B54A32D192ED03ULL + 0x9E3779B97F4A7C15ULL))) {}

  double operator()(std::uint64_t row, std::uint64_t col) const {
    const std::uint64_t base = mix(key_ ^ mix(row + 0x9E3779B97F4A7C15ULL));
    const std::uint64_t h1 = mix(base ^ (2 * col));
    const std::uint64_t h2 = mix(base ^ (2 * col + 1) ^ 0xBF58476D1CE4E5B9ULL);
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
};

}  // namespace fieldrate
