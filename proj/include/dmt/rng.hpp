#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace dmt {

/// Counter-based generator: the n-th 64-bit output of a stream is
/// splitmix64(key + n * golden_gamma). Outputs depend only on (key, counter),
/// so sequences are identical on every platform and independent sub-streams are
/// obtained by hashing a stream id into the key (`derive`).
///
/// Normal variates use the Box-Muller transform, consuming two uniforms per
/// pair and caching the second value.
class CounterRng {
 public:
  static constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0xD1B54A32D192ED03ULL)) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix(key_ + counter_ * kGoldenGamma);
  }

  /// Uniform in (0, 1); never returns 0 so log() is always finite.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  void fill_normal(std::span<double> out) noexcept {
    for (double& v : out) v = normal();
  }

  /// Independent stream keyed by (this stream's key, id). Does not advance *this.
  CounterRng derive(std::uint64_t id) const noexcept {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(id + 0x632BE59BD9B4E019ULL));
    return child;
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dmt
