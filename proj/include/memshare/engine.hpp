#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "memshare/arbiter.hpp"
#include "memshare/cleaner.hpp"
#include "memshare/config.hpp"
#include "memshare/log_store.hpp"

namespace memshare {

struct GetResult {
  bool hit = false;
  std::string value;
  bool shadow_hit = false;
};

struct AppStats {
  AppId id = 0;
  std::uint64_t gets = 0, hits = 0, misses = 0;
  double hit_rate = 0.0;
  std::uint64_t shadow_hits = 0;
  std::uint64_t actual_mem = 0, target_mem = 0;
  std::uint64_t private_mem = 0, shared_mem = 0;
};

struct StatsSnapshot {
  std::vector<AppStats> per_app;  // ordered by app id
  std::uint64_t total_gets = 0, total_hits = 0;
  double combined_hit_rate = 0.0;
  double cleaner_bandwidth_bps = 0.0;
  double live_utilization = 0.0;  // live bytes / capacity of in-use segments
  std::uint64_t live_bytes = 0;
  std::uint64_t free_segments = 0;
  std::uint64_t total_segments = 0;
  std::uint64_t total_memory = 0;
};

// Opaque per-request tag; memshare sessions carry the epoch they started in.
struct RequestToken {
  virtual ~RequestToken() = default;
};

// Lookaside GET/SET/DELETE/STATS surface shared by the log-structured engine
// and the slab baselines, so the harness can swap implementations via config.
class CacheInterface {
 public:
  virtual ~CacheInterface() = default;
  virtual GetResult get(AppId app, std::string_view key) = 0;
  virtual void set(AppId app, std::string_view key, std::string_view value) = 0;
  virtual bool del(AppId app, std::string_view key) = 0;
  virtual StatsSnapshot stats() const = 0;
  virtual void tick(Timestamp now) = 0;
  virtual Timestamp now() const = 0;
  virtual std::unique_ptr<RequestToken> begin_request() { return nullptr; }
};

struct AutoPrivateReport {
  std::map<AppId, std::uint64_t> private_mem;
  PolicyKind previous_policy = PolicyKind::Shared;
};

class MemshareEngine : public CacheInterface {
 public:
  explicit MemshareEngine(const EngineConfig& config, bool server_mode = false);
  ~MemshareEngine() override;

  GetResult get(AppId app, std::string_view key) override;
  void set(AppId app, std::string_view key, std::string_view value) override;
  bool del(AppId app, std::string_view key) override;
  StatsSnapshot stats() const override;
  void tick(Timestamp now) override;
  Timestamp now() const override { return now_.load(std::memory_order_acquire); }
  std::unique_ptr<RequestToken> begin_request() override;

  void register_app(const AppConfig& cfg);

  // Time-averaged shared-policy targets become private memory and the policy
  // swaps to idle tax.
  AutoPrivateReport run_auto_private(Timestamp window);

  // Background cleaning workers (server mode). Simulator runs cleaning inline
  // before a SET when the free pool is below target.
  void start_cleaner_workers();
  void stop_cleaner_workers();

  LogStore& store() { return store_; }
  Arbiter& arbiter() { return arbiter_; }
  Cleaner& cleaner() { return cleaner_; }
  const EngineConfig& config() const { return config_; }

 private:
  void require_app(AppId app) const;

  EngineConfig config_;
  bool server_mode_;
  LogStore store_;
  Arbiter arbiter_;
  Cleaner cleaner_;

  std::atomic<Timestamp> now_{0};
  std::atomic<Timestamp> next_policy_tick_{0};

  std::mutex cleaner_mu_;
  std::condition_variable cleaner_cv_;
  bool stop_workers_ = false;
  std::vector<std::thread> workers_;
};

std::unique_ptr<CacheInterface> make_cache(const EngineConfig& config,
                                           bool server_mode = false);

}  // namespace memshare
