#include "memshare/engine.hpp"

#include <algorithm>

#include "memshare/slab_cache.hpp"

namespace memshare {

namespace {

struct EpochRequestToken : RequestToken {
  explicit EpochRequestToken(EpochGuard g) : guard(std::move(g)) {}
  EpochGuard guard;
};

LogStoreConfig store_config(const EngineConfig& cfg, bool server_mode) {
  LogStoreConfig sc;
  sc.total_memory_bytes = cfg.total_memory_bytes;
  sc.segment_size_bytes = cfg.segment_size_bytes;
  sc.free_pool_target_fraction = cfg.free_pool_target_fraction;
  sc.blocking = server_mode;
  return sc;
}

CleanerConfig cleaner_config(const EngineConfig& cfg) {
  CleanerConfig cc;
  cc.segments_per_pass = cfg.segments_per_pass;
  cc.need_fraction = cfg.need_fraction;
  cc.tail_drop_threshold = cfg.tail_drop_threshold;
  cc.seed = cfg.rng_seed;
  return cc;
}

std::uint64_t shared_pool_bytes(const EngineConfig& cfg) {
  std::uint64_t reserved = 0;
  for (const auto& app : cfg.apps) reserved += app.private_mem_bytes;
  return cfg.total_memory_bytes > reserved ? cfg.total_memory_bytes - reserved : 0;
}

}  // namespace

MemshareEngine::MemshareEngine(const EngineConfig& config, bool server_mode)
    : config_(config),
      server_mode_(server_mode),
      store_(store_config(config, server_mode)),
      arbiter_(config.policy, config.tax_rate, config.idle_time, config.rng_seed,
               config.apps, shared_pool_bytes(config)),
      cleaner_(store_, arbiter_, cleaner_config(config)) {
  config_.validate();
  next_policy_tick_ = config_.tick_interval;
}

MemshareEngine::~MemshareEngine() { stop_cleaner_workers(); }

void MemshareEngine::require_app(AppId app) const {
  if (!arbiter_.has_app(app)) throw UnknownAppError(app);
}

void MemshareEngine::register_app(const AppConfig& cfg) { arbiter_.register_app(cfg); }

GetResult MemshareEngine::get(AppId app, std::string_view key) {
  require_app(app);
  Timestamp t = now();
  auto hit = store_.lookup(app, key, t);
  if (hit) {
    arbiter_.count_hit(app);
    arbiter_.record_access(app, hit->total_size, hit->old_last_access, t);
    GetResult res;
    res.hit = true;
    res.value = std::move(hit->value);
    return res;
  }
  arbiter_.count_miss(app);
  TransferReport rep = arbiter_.on_miss(app, hash_key(key));
  GetResult res;
  res.shadow_hit = rep.shadow_hit;
  return res;
}

void MemshareEngine::set(AppId app, std::string_view key, std::string_view value) {
  require_app(app);
  Timestamp t = now();
  if (!server_mode_ && store_.needs_cleaning()) cleaner_.clean_until_target(t);
  AppendResult res = store_.append(app, key, value, t);
  if (res.overwrote) {
    arbiter_.record_overwrite(app, res.old_total_size, res.old_last_access,
                              res.total_size, t);
  } else {
    arbiter_.record_insert(app, res.total_size, t);
  }
  if (server_mode_ && store_.needs_cleaning()) cleaner_cv_.notify_all();
}

bool MemshareEngine::del(AppId app, std::string_view key) {
  require_app(app);
  RemoveResult res = store_.remove(app, key);
  if (res.removed) arbiter_.record_remove(app, res.total_size, res.last_access);
  return res.removed;
}

void MemshareEngine::tick(Timestamp t) {
  Timestamp cur = now_.load(std::memory_order_acquire);
  while (t > cur && !now_.compare_exchange_weak(cur, t)) {
  }
  Timestamp next = next_policy_tick_.load(std::memory_order_acquire);
  if (now() >= next &&
      next_policy_tick_.compare_exchange_strong(next, now() + config_.tick_interval)) {
    arbiter_.run_policy_tick(now());
  }
}

StatsSnapshot MemshareEngine::stats() const {
  StatsSnapshot snap;
  for (AppId id : arbiter_.app_ids()) {
    AppCounters c = arbiter_.counters(id);
    AppStats s;
    s.id = id;
    s.hits = c.hits;
    s.misses = c.misses;
    s.gets = c.hits + c.misses;
    s.hit_rate = s.gets ? static_cast<double>(s.hits) / static_cast<double>(s.gets) : 0.0;
    s.shadow_hits = c.shadow_hits;
    s.actual_mem = c.actual_mem;
    s.target_mem = c.target_mem;
    s.private_mem = c.private_mem;
    s.shared_mem = c.shared_mem;
    snap.per_app.push_back(s);
    snap.total_gets += s.gets;
    snap.total_hits += s.hits;
  }
  snap.combined_hit_rate =
      snap.total_gets ? static_cast<double>(snap.total_hits) /
                            static_cast<double>(snap.total_gets)
                      : 0.0;
  snap.cleaner_bandwidth_bps =
      cleaner_.bandwidth_bytes_per_sec(config_.metrics_window, now());
  snap.live_bytes = store_.live_bytes_total();
  snap.free_segments = store_.free_segments();
  snap.total_segments = store_.total_segments();
  snap.total_memory = config_.total_memory_bytes;
  std::uint64_t in_use = snap.total_segments - snap.free_segments;
  snap.live_utilization =
      in_use ? static_cast<double>(snap.live_bytes) /
                   (static_cast<double>(in_use) * store_.data_capacity())
             : 0.0;
  return snap;
}

std::unique_ptr<RequestToken> MemshareEngine::begin_request() {
  return std::make_unique<EpochRequestToken>(store_.epoch_guard());
}

AutoPrivateReport MemshareEngine::run_auto_private(Timestamp window) {
  AutoPrivateReport rep;
  rep.previous_policy = arbiter_.policy();
  rep.private_mem = arbiter_.auto_private_memory(window, now());
  arbiter_.switch_to_idle_tax(rep.private_mem);
  return rep;
}

void MemshareEngine::start_cleaner_workers() {
  if (!workers_.empty()) return;
  stop_workers_ = false;
  std::uint32_t count = std::max<std::uint32_t>(1, config_.max_parallel_passes);
  for (std::uint32_t i = 0; i < count; ++i) {
    workers_.emplace_back([this] {
      std::unique_lock<std::mutex> lk(cleaner_mu_);
      while (!stop_workers_) {
        cleaner_cv_.wait_for(lk, std::chrono::milliseconds(20), [this] {
          return stop_workers_ || store_.needs_cleaning();
        });
        if (stop_workers_) return;
        lk.unlock();
        store_.reclaim_retired();
        if (store_.needs_cleaning()) {
          auto report = cleaner_.run_pass(now());
          (void)report;
          store_.reclaim_retired();
        }
        lk.lock();
      }
    });
  }
}

void MemshareEngine::stop_cleaner_workers() {
  {
    std::lock_guard<std::mutex> lk(cleaner_mu_);
    stop_workers_ = true;
  }
  cleaner_cv_.notify_all();
  for (auto& t : workers_) t.join();
  workers_.clear();
}

std::unique_ptr<CacheInterface> make_cache(const EngineConfig& config, bool server_mode) {
  switch (config.engine) {
    case EngineKind::Memshare:
      return std::make_unique<MemshareEngine>(config, server_mode);
    case EngineKind::SlabPartitioned:
      return std::make_unique<SlabCache>(config, SlabMode::Partitioned);
    case EngineKind::SlabGreedy:
      return std::make_unique<SlabCache>(config, SlabMode::GreedyShared);
  }
  throw ConfigError("unknown engine kind");
}

}  // namespace memshare
