#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mlkmc/errors.hpp"

namespace mlkmc {

/// Seedable generator with independent per-replica streams.
///
/// The engine is std::mt19937_64 initialised through std::seed_seq from the
/// (seed, stream) pair. seed_seq's mixing is fully specified by the standard,
/// so a given pair reproduces the same sequence on every conforming platform.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32), 0x6d6c6b6du};
    engine_.seed(seq);
  }
  explicit Rng(std::uint64_t seed = 0) : Rng(seed, 0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe to pass to log().
  double uniform_open_closed() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on (0, 1); waiting times drawn from it are strictly positive.
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  int index(int n) {
    int i = static_cast<int>(uniform() * n);
    return i < n ? i : n - 1;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

/// Exponential holding time with the given total rate: dt = -log(u) / rate.
inline double waiting_time_from_uniform(double rate, double u) {
  if (!(rate > 0.0)) {
    throw AbsorbingStateError("no feasible events: total rate is not positive");
  }
  return -std::log(u) / rate;
}

inline double sample_waiting_time(double rate, Rng& rng) {
  if (!(rate > 0.0)) {
    throw AbsorbingStateError("no feasible events: total rate is not positive");
  }
  return waiting_time_from_uniform(rate, rng.uniform_open());
}

}  // namespace mlkmc
