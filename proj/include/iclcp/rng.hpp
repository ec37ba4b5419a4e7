#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace iclcp {

/// Explicit-state random stream.
///
/// Wraps std::mt19937_64 and performs the uniform and Gaussian transforms
/// itself (53-bit mantissa uniforms, Box-Muller normals), so a given seed
/// produces the same numbers on every standard library. Independent streams
/// are derived with `Rng::stream(seed, id)`, which scrambles (seed, id) with
/// SplitMix64 before seeding the engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Stream `stream_id` of the family rooted at `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);

  /// Child stream seeded from this stream's next draw.
  Rng split();

  bool operator==(const Rng& other) const = default;

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace iclcp
