#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace syncog {

// mt19937_64's output sequence is fixed by the standard; the distribution
// helpers below are ours so draws are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal (Box-Muller, second variate cached).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace syncog
