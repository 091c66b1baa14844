#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace lingermort {

/// Counter-based random streams. A stream is fully determined by its key
/// (seed, path, year, purpose), so any sub-stream can be replayed in
/// isolation and results never depend on how work is scheduled.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t year,
             std::uint64_t purpose)
      : key_(mix(mix(mix(mix(0x6a09e667f3bcc909ULL ^ seed) ^ path) ^ year) ^ purpose)) {}

  explicit CounterRng(std::uint64_t seed) : CounterRng(seed, 0, 0, 0) {}

  result_type operator()() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
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

  bool bernoulli(double p) { return uniform() < p; }

 private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stream purposes used by the simulators.
enum class StreamPurpose : std::uint64_t {
  CommonTrend = 1,
  CauseTrend = 2,
  JumpOccurrence = 3,
  JumpSeverity = 4,
  Noise = 5,
  InjectedShockBase = 100,
};

}  // namespace lingermort
