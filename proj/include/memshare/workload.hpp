#pragma once

#include <string>
#include <vector>

#include "memshare/common.hpp"
#include "memshare/rng.hpp"
#include "memshare/trace.hpp"

namespace memshare {

struct InvalidSpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SizeDist {
  enum class Kind { Constant, Uniform, TwoPoint };
  Kind kind = Kind::Constant;
  std::uint32_t value = 100;           // Constant
  std::uint32_t min = 64, max = 1024;  // Uniform
  std::uint32_t a = 56, b = 576;       // TwoPoint
  double p_a = 0.5;

  // Sizes are a pure function of the key so GET records carry the same size
  // a fill-on-miss SET would use.
  std::uint32_t sample(std::uint64_t key_hash) const;
};

struct Popularity {
  enum class Kind { Uniform, Zipfian };
  Kind kind = Kind::Uniform;
  double theta = 0.99;
};

struct RateProfile {
  enum class Kind { Steady, Burst };
  Kind kind = Kind::Steady;
  double base_per_sec = 100.0;
  Timestamp burst_start = 0;
  Timestamp burst_duration = 0;
  double multiplier = 1.0;
};

struct AppWorkload {
  AppId id = 0;
  std::uint64_t keyspace = 1000;
  SizeDist size;
  Popularity popularity;
  RateProfile rate;
  double get_fraction = 0.9;
  std::string key_prefix;
};

struct WorkloadSpec {
  Timestamp duration = 60 * kMicrosPerSecond;
  std::vector<AppWorkload> apps;
};

// Zipfian ranks over [0, n) using the standard zeta/eta method; sampling uses
// only the portable Rng primitives so a (spec, seed) pair regenerates the
// same stream on any platform.
class ZipfianGenerator {
 public:
  ZipfianGenerator(std::uint64_t n, double theta);
  std::uint64_t next(Rng& rng);

 private:
  std::uint64_t n_;
  double theta_;
  double zetan_;
  double alpha_;
  double eta_;
};

WorkloadSpec parse_workload_spec(const std::string& json_text);
WorkloadSpec load_workload_spec(const std::string& path);

// Deterministic function of (spec, seed): per-app event streams merged by
// (timestamp, app id, sequence).
std::vector<TraceRecord> generate(const WorkloadSpec& spec, std::uint64_t seed);

}  // namespace memshare
