#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "memshare/common.hpp"

namespace memshare {

enum class PolicyKind { Partitioned, Shared, IdleTax };
enum class EngineKind { Memshare, SlabPartitioned, SlabGreedy };

struct RankPolicy {
  enum class Kind { LRU, LFU, SegmentedLRU, Custom };
  Kind kind = Kind::LRU;
  std::uint32_t slru_threshold = 2;  // frequency that promotes to the protected tier
  std::function<double(Timestamp t, std::uint32_t f)> custom;

  static RankPolicy lru() { return {}; }
  static RankPolicy lfu() { return {Kind::LFU, 2, nullptr}; }
  static RankPolicy slru(std::uint32_t threshold) {
    return {Kind::SegmentedLRU, threshold, nullptr};
  }
};

struct AppConfig {
  AppId id = 0;
  std::uint64_t private_mem_bytes = 0;
  std::uint64_t credit_size_bytes = 65536;
  RankPolicy rank_policy;
  std::uint64_t shadow_queue_bytes = 10485760;
};

struct EngineConfig {
  EngineKind engine = EngineKind::Memshare;
  std::uint64_t total_memory_bytes = 64ull << 20;
  std::uint32_t segment_size_bytes = 1048576;
  double free_pool_target_fraction = 0.01;

  PolicyKind policy = PolicyKind::Partitioned;
  double tax_rate = 0.5;
  Timestamp idle_time = 5ull * 3600 * kMicrosPerSecond;  // 5 h of trace time
  std::uint64_t rng_seed = 1;

  std::uint32_t segments_per_pass = 100;
  double need_fraction = 0.5;
  double tail_drop_threshold = 0.5;
  std::uint32_t max_parallel_passes = 1;

  Timestamp tick_interval = kMicrosPerSecond;     // policy recompute cadence
  Timestamp metrics_window = kMicrosPerSecond;    // bandwidth / series window

  std::vector<AppConfig> apps;

  void validate() const;  // throws ConfigError
};

// Flat key=value format, '#' comments; per-app keys use an "app.<id>." prefix.
EngineConfig parse_config(const std::string& text);
EngineConfig load_config(const std::string& path);

std::string to_string(EngineKind k);
std::string to_string(PolicyKind k);
EngineKind engine_kind_from_string(const std::string& s);
PolicyKind policy_kind_from_string(const std::string& s);
RankPolicy rank_policy_from_string(const std::string& s);

}  // namespace memshare
