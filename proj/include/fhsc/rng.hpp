#pragma once

#include <cstdint>
#include <string>

namespace fhsc {

// Deterministic, platform-independent generator: xoshiro256** state seeded by a
// splitmix64 walk over (seed, stream). Distinct (seed, stream) pairs give
// independent streams by construction, so chains / replicates / restarts can be
// assigned their own stream and run in any order or in parallel.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "xoshiro256** (splitmix64 stream seeding)";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform on (0,1), never returns the endpoints.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal (Marsaglia polar with cached spare).
  double normal();

  // Gamma(shape, rate) via Marsaglia-Tsang; shape < 1 handled with the U^(1/shape) boost.
  double gamma(double shape, double rate);

  // Beta(a, b) from two gammas.
  double beta(double a, double b);

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Composes hierarchical stream ids (e.g. stream_id(kChainBase, chain)).
std::uint64_t stream_id(std::uint64_t a, std::uint64_t b);

}  // namespace fhsc
