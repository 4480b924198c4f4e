#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace sgdclt {

/// Random stream owned by exactly one replica (or one caller).
///
/// The engine is std::mt19937_64 and the distributions come from
/// Boost.Random, whose algorithms are fixed by the library rather than by the
/// standard-library vendor, so a (seed, stream) pair produces the same draws
/// on every platform.
class Rng {
 public:
  using Engine = std::mt19937_64;

  Rng(std::uint64_t master_seed, std::uint64_t stream);

  double normal() { return normal_(engine_); }
  double uniform01() { return uniform_(engine_); }
  /// Uniform on {0, ..., n-1}.
  std::size_t index(std::size_t n) {
    return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  Engine& engine() { return engine_; }

 private:
  Engine engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
};

/// Streams below this tag are reserved for replicas; auxiliary draws (dataset
/// synthesis, initial points, calibration trials) use tagged streams above it.
inline constexpr std::uint64_t kAuxStreamBase = std::uint64_t{1} << 40;

}  // namespace sgdclt
