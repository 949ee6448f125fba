#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cvdd {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based stream: the k-th output is a pure function of (key, k), so a
/// stream is fully determined by (seed, stream id) regardless of which thread
/// consumes it. Normals use Box-Muller for bitwise portability.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : key_(splitmix64(seed ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL))) {}

  std::uint64_t next() noexcept { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  /// Uniform on (0, 1).
  double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cvdd
