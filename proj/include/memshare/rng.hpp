#pragma once

#include <cstdint>
#include <random>

namespace memshare {

// All randomized decisions (donor picks, segment selection, workload
// generation) go through these helpers. mt19937_64 output is pinned by the
// standard and the derivations below avoid std::*_distribution, whose
// sequences vary between standard libraries, so a seed reproduces the same
// stream everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, n). n must be > 0. Modulo bias is < n / 2^64.
  std::uint64_t bounded(std::uint64_t n) { return gen_() % n; }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace memshare
