#pragma once

#include <array>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "memshare/common.hpp"
#include "memshare/config.hpp"
#include "memshare/rng.hpp"

namespace memshare {

// Relocation priority. Higher rank = more valuable = kept longer. Compared
// lexicographically; the cleaner breaks remaining ties by last-access time and
// then by insertion order.
struct RankValue {
  double primary = 0;
  double secondary = 0;
  friend bool operator<(const RankValue& a, const RankValue& b) {
    if (a.primary != b.primary) return a.primary < b.primary;
    return a.secondary < b.secondary;
  }
  friend bool operator==(const RankValue& a, const RankValue& b) {
    return a.primary == b.primary && a.secondary == b.secondary;
  }
};

RankValue rank_record(const RankPolicy& policy, Timestamp t, std::uint32_t f);

// Bounded FIFO of (key hash, length) for recently evicted items. Hashes only;
// collisions over-count shadow hits slightly, which is tolerated.
class ShadowQueue {
 public:
  explicit ShadowQueue(std::uint64_t capacity_bytes) : capacity_(capacity_bytes) {}

  void push(std::uint64_t key_hash, std::uint32_t length);
  bool contains(std::uint64_t key_hash) const { return counts_.count(key_hash) != 0; }
  std::uint64_t represented_bytes() const { return represented_; }
  std::size_t size() const { return entries_.size(); }
  std::uint64_t capacity_bytes() const { return capacity_; }

 private:
  std::uint64_t capacity_;
  std::uint64_t represented_ = 0;
  std::deque<std::pair<std::uint64_t, std::uint32_t>> entries_;
  std::unordered_map<std::uint64_t, std::uint32_t> counts_;
};

// Ring of last-access time buckets approximating per-app idle bytes without
// scanning objects. 32 buckets of width idle_time/16; mass older than the
// ring accumulates in an "ancient" bucket. Error is bounded by one bucket
// width.
class IdleHistogram {
 public:
  explicit IdleHistogram(Timestamp idle_time)
      : width_(std::max<Timestamp>(1, idle_time / 16)) {}

  void insert(std::uint64_t len, Timestamp now);
  void access(std::uint64_t len, Timestamp old_t, Timestamp now);
  void remove(std::uint64_t len, Timestamp t);
  std::uint64_t idle_bytes(Timestamp now, Timestamp idle_time);

 private:
  void advance(Timestamp now);
  void sub_at(std::uint64_t len, Timestamp t);

  Timestamp width_;
  std::uint64_t base_ = 0;  // oldest bucket index currently in the ring
  std::array<std::uint64_t, 32> ring_{};
  std::uint64_t ancient_ = 0;
};

struct TransferReport {
  bool shadow_checked = false;  // false when the try-lock failed
  bool shadow_hit = false;
  bool transferred = false;
  AppId donor = 0;
  std::uint64_t amount = 0;
};

struct IdleTaxReport {
  std::uint64_t idle_mem = 0;
  double active_fraction = 1.0;
  double tau = 1.0;
  std::uint64_t target_mem = 0;
};

struct AppCounters {
  AppId id = 0;
  std::uint64_t hits = 0, misses = 0, shadow_hits = 0;
  std::uint64_t actual_mem = 0, target_mem = 0;
  std::uint64_t private_mem = 0, shared_mem = 0;
  std::uint64_t credits_received = 0;
};

// Per-application accounting: bytes in use, targets under the configured
// sharing policy, shadow queues, and ranking-function evaluation.
class Arbiter {
 public:
  Arbiter(PolicyKind policy, double tax_rate, Timestamp idle_time, std::uint64_t seed,
          const std::vector<AppConfig>& apps, std::uint64_t shared_pool_bytes);

  void register_app(const AppConfig& cfg);  // late apps start with no shared memory
  bool has_app(AppId app) const;
  std::vector<AppId> app_ids() const;
  PolicyKind policy() const { return policy_; }

  // targetMem / actualMem; +inf when actualMem = 0 and targetMem > 0; 1.0
  // when both are 0.
  double need(AppId app) const;
  static double need_value(std::uint64_t target_mem, std::uint64_t actual_mem);

  RankValue rank(AppId app, Timestamp t, std::uint32_t f) const;
  const RankPolicy& rank_policy(AppId app) const;

  // Credit transfer on a cache miss. The shadow lookup uses a non-blocking
  // lock attempt; when it fails the check is skipped and no credit moves.
  TransferReport on_miss(AppId app, std::uint64_t key_hash);

  // Idle-tax target recomputation for one app. Throws ConfigError when
  // tax_rate is outside [0, 1].
  IdleTaxReport set_target_idle_tax(AppId app, double tax_rate, Timestamp idle_time,
                                    Timestamp now);

  // Periodic work: idle-tax targets for every app plus target history samples.
  void run_policy_tick(Timestamp now);

  void count_hit(AppId app);
  void count_miss(AppId app);

  void record_insert(AppId app, std::uint32_t len, Timestamp now);
  void record_overwrite(AppId app, std::uint32_t old_len, Timestamp old_t,
                        std::uint32_t new_len, Timestamp now);
  void record_remove(AppId app, std::uint32_t len, Timestamp t);
  void record_access(AppId app, std::uint32_t len, Timestamp old_t, Timestamp now);
  void record_eviction(AppId app, std::uint64_t key_hash, std::uint32_t len,
                       Timestamp last_access);

  // Cleaning-pass protocol: candidates' bytes are subtracted up front and
  // restored per relocation; evictions then adjust only shadow queues and
  // histograms, applied in one lock acquisition per app.
  void pass_subtract(AppId app, std::uint64_t bytes);
  void pass_restore(AppId app, std::uint64_t bytes);
  struct EvictionItem {
    std::uint64_t key_hash;
    std::uint32_t length;
    Timestamp last_access;
  };
  void apply_eviction_batch(AppId app, const std::vector<EvictionItem>& items);

  // Time-averaged targetMem per app over the trailing window.
  std::map<AppId, std::uint64_t> auto_private_memory(Timestamp window, Timestamp now) const;
  void switch_to_idle_tax(const std::map<AppId, std::uint64_t>& private_mem);

  AppCounters counters(AppId app) const;
  std::uint64_t actual_mem(AppId app) const;
  std::uint64_t target_mem(AppId app) const;
  std::uint64_t shared_mem(AppId app) const;
  std::uint64_t total_shared_mem() const;
  std::uint64_t total_actual_mem() const;
  std::uint64_t shadow_hits(AppId app) const;
  std::uint64_t credits_received(AppId app) const;

 private:
  struct AppState {
    explicit AppState(const AppConfig& cfg, Timestamp idle_time)
        : id(cfg.id),
          private_mem(cfg.private_mem_bytes),
          credit_size(cfg.credit_size_bytes),
          rank_policy(cfg.rank_policy),
          shadow(cfg.shadow_queue_bytes),
          hist(idle_time) {}
    AppId id;
    std::uint64_t private_mem;
    std::uint64_t shared_mem = 0;
    std::uint64_t target_mem = 0;
    std::uint64_t actual_mem = 0;
    std::uint64_t credit_size;
    RankPolicy rank_policy;
    ShadowQueue shadow;
    IdleHistogram hist;
    std::uint64_t hits = 0, misses = 0, shadow_hits = 0;
    std::uint64_t credits_received = 0;
    std::vector<std::pair<Timestamp, std::uint64_t>> target_samples;
    mutable std::mutex mu;
  };

  AppState& state(AppId app);
  const AppState& state(AppId app) const;
  void recompute_shared_targets_locked();
  IdleTaxReport idle_tax_target(AppState& a, double tax_rate, Timestamp idle_time,
                                Timestamp now);

  PolicyKind policy_;
  double tax_rate_;
  Timestamp idle_time_;
  Rng rng_;
  // Ordered map: donor candidate enumeration and every per-app loop iterate
  // in app-id order, keeping runs deterministic.
  std::map<AppId, std::unique_ptr<AppState>> apps_;
  mutable std::mutex registry_mu_;
};

}  // namespace memshare
