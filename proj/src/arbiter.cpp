#include "memshare/arbiter.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace memshare {

RankValue rank_record(const RankPolicy& policy, Timestamp t, std::uint32_t f) {
  switch (policy.kind) {
    case RankPolicy::Kind::LRU:
      return {static_cast<double>(t), 0};
    case RankPolicy::Kind::LFU:
      return {static_cast<double>(f), 0};
    case RankPolicy::Kind::SegmentedLRU:
      return {f >= policy.slru_threshold ? 1.0 : 0.0, static_cast<double>(t)};
    case RankPolicy::Kind::Custom:
      return {policy.custom(t, f), 0};
  }
  return {0, 0};
}

// -- ShadowQueue ----------------------------------------------------------------

void ShadowQueue::push(std::uint64_t key_hash, std::uint32_t length) {
  entries_.emplace_back(key_hash, length);
  counts_[key_hash] += 1;
  represented_ += length;
  while (represented_ > capacity_ && !entries_.empty()) {
    auto [h, len] = entries_.front();
    entries_.pop_front();
    represented_ -= len;
    auto it = counts_.find(h);
    if (it != counts_.end() && --it->second == 0) counts_.erase(it);
  }
}

// -- IdleHistogram ----------------------------------------------------------------

void IdleHistogram::advance(Timestamp now) {
  std::uint64_t cur = now / width_;
  if (cur < base_ + ring_.size()) return;
  std::uint64_t new_base = cur - (ring_.size() - 1);
  for (std::uint64_t b = base_; b < new_base; ++b) {
    ancient_ += ring_[b % ring_.size()];
    ring_[b % ring_.size()] = 0;
  }
  base_ = new_base;
}

void IdleHistogram::sub_at(std::uint64_t len, Timestamp t) {
  std::uint64_t b = t / width_;
  if (b < base_) {
    ancient_ -= std::min(ancient_, len);
  } else {
    auto& slot = ring_[b % ring_.size()];
    slot -= std::min(slot, len);
  }
}

void IdleHistogram::insert(std::uint64_t len, Timestamp now) {
  advance(now);
  ring_[(now / width_) % ring_.size()] += len;
}

void IdleHistogram::access(std::uint64_t len, Timestamp old_t, Timestamp now) {
  advance(now);
  sub_at(len, old_t);
  ring_[(now / width_) % ring_.size()] += len;
}

void IdleHistogram::remove(std::uint64_t len, Timestamp t) { sub_at(len, t); }

std::uint64_t IdleHistogram::idle_bytes(Timestamp now, Timestamp idle_time) {
  advance(now);
  if (now < idle_time) return 0;
  Timestamp cutoff = now - idle_time;
  std::uint64_t idle = ancient_;
  std::uint64_t cur = now / width_;
  for (std::uint64_t b = base_; b <= cur; ++b) {
    // A bucket counts as idle only when its whole span is older than the
    // cutoff, so idleMem is under- rather than over-estimated.
    if ((b + 1) * width_ <= cutoff) idle += ring_[b % ring_.size()];
  }
  return idle;
}

// -- Arbiter --------------------------------------------------------------------

Arbiter::Arbiter(PolicyKind policy, double tax_rate, Timestamp idle_time,
                 std::uint64_t seed, const std::vector<AppConfig>& apps,
                 std::uint64_t shared_pool_bytes)
    : policy_(policy),
      tax_rate_(tax_rate),
      idle_time_(idle_time),
      rng_(derive_seed(seed, 0xa5b17e5ull)) {
  if (tax_rate_ < 0.0 || tax_rate_ > 1.0) throw ConfigError("tax_rate must be in [0, 1]");
  for (const auto& cfg : apps) {
    if (apps_.count(cfg.id)) throw ConfigError("duplicate app id " + std::to_string(cfg.id));
    apps_.emplace(cfg.id, std::make_unique<AppState>(cfg, idle_time_));
  }
  if (policy_ == PolicyKind::Shared && !apps_.empty()) {
    // Startup apps split the shared pool equally; the remainder goes to the
    // lowest ids so the total is preserved to the byte.
    std::uint64_t n = apps_.size();
    std::uint64_t per = shared_pool_bytes / n;
    std::uint64_t extra = shared_pool_bytes % n;
    for (auto& [id, a] : apps_) {
      a->shared_mem = per + (extra > 0 ? 1 : 0);
      if (extra > 0) --extra;
    }
  }
  for (auto& [id, a] : apps_) {
    switch (policy_) {
      case PolicyKind::Shared:
        a->target_mem = a->private_mem + a->shared_mem;
        break;
      case PolicyKind::Partitioned:
      case PolicyKind::IdleTax:
        a->target_mem = a->private_mem;
        break;
    }
  }
}

void Arbiter::register_app(const AppConfig& cfg) {
  std::lock_guard<std::mutex> lk(registry_mu_);
  if (apps_.count(cfg.id)) throw ConfigError("duplicate app id " + std::to_string(cfg.id));
  auto a = std::make_unique<AppState>(cfg, idle_time_);
  a->target_mem = a->private_mem;  // shared_mem accrues via credits only
  apps_.emplace(cfg.id, std::move(a));
}

bool Arbiter::has_app(AppId app) const {
  std::lock_guard<std::mutex> lk(registry_mu_);
  return apps_.count(app) != 0;
}

std::vector<AppId> Arbiter::app_ids() const {
  std::lock_guard<std::mutex> lk(registry_mu_);
  std::vector<AppId> ids;
  ids.reserve(apps_.size());
  for (const auto& [id, a] : apps_) ids.push_back(id);
  return ids;
}

Arbiter::AppState& Arbiter::state(AppId app) {
  std::lock_guard<std::mutex> lk(registry_mu_);
  auto it = apps_.find(app);
  if (it == apps_.end()) throw UnknownAppError(app);
  return *it->second;
}

const Arbiter::AppState& Arbiter::state(AppId app) const {
  std::lock_guard<std::mutex> lk(registry_mu_);
  auto it = apps_.find(app);
  if (it == apps_.end()) throw UnknownAppError(app);
  return *it->second;
}

double Arbiter::need_value(std::uint64_t target_mem, std::uint64_t actual_mem) {
  if (actual_mem == 0) {
    return target_mem == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(target_mem) / static_cast<double>(actual_mem);
}

double Arbiter::need(AppId app) const {
  const AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  return need_value(a.target_mem, a.actual_mem);
}

RankValue Arbiter::rank(AppId app, Timestamp t, std::uint32_t f) const {
  return rank_record(state(app).rank_policy, t, f);
}

const RankPolicy& Arbiter::rank_policy(AppId app) const { return state(app).rank_policy; }

void Arbiter::recompute_shared_targets_locked() {
  for (auto& [id, a] : apps_) {
    std::lock_guard<std::mutex> lk(a->mu);
    a->target_mem = a->private_mem + a->shared_mem;
  }
}

TransferReport Arbiter::on_miss(AppId app, std::uint64_t key_hash) {
  TransferReport rep;
  AppState& gainer = state(app);
  {
    std::unique_lock<std::mutex> lk(gainer.mu, std::try_to_lock);
    if (!lk.owns_lock()) return rep;  // skipped, no credit moves
    rep.shadow_checked = true;
    rep.shadow_hit = gainer.shadow.contains(key_hash);
    if (rep.shadow_hit) gainer.shadow_hits += 1;
  }
  if (policy_ != PolicyKind::Shared) return rep;

  std::lock_guard<std::mutex> reg(registry_mu_);
  if (rep.shadow_hit) {
    std::uint64_t credit = gainer.credit_size;
    std::vector<AppState*> candidates;
    for (auto& [id, a] : apps_) {
      if (id == app) continue;
      std::lock_guard<std::mutex> lk(a->mu);
      if (a->shared_mem >= credit) candidates.push_back(a.get());
    }
    if (!candidates.empty()) {
      AppState* donor = candidates[rng_.bounded(candidates.size())];
      {
        std::scoped_lock lk(donor->mu, gainer.mu);
        donor->shared_mem -= credit;
        gainer.shared_mem += credit;
        gainer.credits_received += credit;
      }
      rep.transferred = true;
      rep.donor = donor->id;
      rep.amount = credit;
    }
  }
  recompute_shared_targets_locked();
  return rep;
}

IdleTaxReport Arbiter::idle_tax_target(AppState& a, double tax_rate, Timestamp idle_time,
                                       Timestamp now) {
  if (tax_rate < 0.0 || tax_rate > 1.0) throw ConfigError("tax_rate must be in [0, 1]");
  IdleTaxReport rep;
  std::lock_guard<std::mutex> lk(a.mu);
  std::uint64_t idle = std::min(a.hist.idle_bytes(now, idle_time), a.actual_mem);
  rep.idle_mem = idle;
  rep.active_fraction =
      a.actual_mem == 0 ? 1.0
                        : 1.0 - static_cast<double>(idle) / static_cast<double>(a.actual_mem);
  double denom = 1.0 - rep.active_fraction * tax_rate;
  if (tax_rate >= 1.0) {
    if (denom <= 0.0) {
      // Fully active at a 100% tax: nothing is idle, nothing is taxed.
      rep.tau = 1.0;
      rep.target_mem = a.private_mem;
    } else {
      rep.tau = std::numeric_limits<double>::infinity();
      rep.target_mem = 0;
    }
  } else {
    rep.tau = denom / (1.0 - tax_rate);
    rep.target_mem = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(a.private_mem) * (1.0 - tax_rate) / denom));
  }
  a.target_mem = rep.target_mem;
  return rep;
}

IdleTaxReport Arbiter::set_target_idle_tax(AppId app, double tax_rate, Timestamp idle_time,
                                           Timestamp now) {
  return idle_tax_target(state(app), tax_rate, idle_time, now);
}

void Arbiter::run_policy_tick(Timestamp now) {
  std::vector<AppId> ids = app_ids();
  for (AppId id : ids) {
    AppState& a = state(id);
    if (policy_ == PolicyKind::IdleTax) idle_tax_target(a, tax_rate_, idle_time_, now);
    std::lock_guard<std::mutex> lk(a.mu);
    a.target_samples.emplace_back(now, a.target_mem);
  }
}

void Arbiter::count_hit(AppId app) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.hits += 1;
}

void Arbiter::count_miss(AppId app) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.misses += 1;
}

void Arbiter::record_insert(AppId app, std::uint32_t len, Timestamp now) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.actual_mem += len;
  a.hist.insert(len, now);
}

void Arbiter::record_overwrite(AppId app, std::uint32_t old_len, Timestamp old_t,
                               std::uint32_t new_len, Timestamp now) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.actual_mem -= std::min<std::uint64_t>(a.actual_mem, old_len);
  a.actual_mem += new_len;
  a.hist.remove(old_len, old_t);
  a.hist.insert(new_len, now);
}

void Arbiter::record_remove(AppId app, std::uint32_t len, Timestamp t) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.actual_mem -= std::min<std::uint64_t>(a.actual_mem, len);
  a.hist.remove(len, t);
}

void Arbiter::record_access(AppId app, std::uint32_t len, Timestamp old_t, Timestamp now) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.hist.access(len, old_t, now);
}

void Arbiter::record_eviction(AppId app, std::uint64_t key_hash, std::uint32_t len,
                              Timestamp last_access) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.actual_mem -= std::min<std::uint64_t>(a.actual_mem, len);
  a.shadow.push(key_hash, len);
  a.hist.remove(len, last_access);
}

void Arbiter::pass_subtract(AppId app, std::uint64_t bytes) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.actual_mem -= std::min(a.actual_mem, bytes);
}

void Arbiter::pass_restore(AppId app, std::uint64_t bytes) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  a.actual_mem += bytes;
}

void Arbiter::apply_eviction_batch(AppId app, const std::vector<EvictionItem>& items) {
  AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  for (const auto& item : items) {
    a.shadow.push(item.key_hash, item.length);
    a.hist.remove(item.length, item.last_access);
  }
}

std::map<AppId, std::uint64_t> Arbiter::auto_private_memory(Timestamp window,
                                                            Timestamp now) const {
  std::lock_guard<std::mutex> reg(registry_mu_);
  Timestamp from = now >= window ? now - window : 0;
  std::map<AppId, std::uint64_t> out;
  for (const auto& [id, a] : apps_) {
    std::lock_guard<std::mutex> lk(a->mu);
    if (a->target_samples.empty() || a->target_samples.front().first > from ||
        now < window) {
      throw InsufficientHistoryError("target history does not cover the window");
    }
    std::uint64_t sum = 0, n = 0;
    for (const auto& [ts, target] : a->target_samples) {
      if (ts >= from && ts <= now) {
        sum += target;
        ++n;
      }
    }
    if (n == 0) throw InsufficientHistoryError("no target samples in the window");
    out[id] = sum / n;
  }
  return out;
}

void Arbiter::switch_to_idle_tax(const std::map<AppId, std::uint64_t>& private_mem) {
  std::lock_guard<std::mutex> reg(registry_mu_);
  policy_ = PolicyKind::IdleTax;
  for (auto& [id, a] : apps_) {
    std::lock_guard<std::mutex> lk(a->mu);
    auto it = private_mem.find(id);
    if (it != private_mem.end()) a->private_mem = it->second;
    a->shared_mem = 0;
    a->target_mem = a->private_mem;
  }
}

AppCounters Arbiter::counters(AppId app) const {
  const AppState& a = state(app);
  std::lock_guard<std::mutex> lk(a.mu);
  AppCounters c;
  c.id = a.id;
  c.hits = a.hits;
  c.misses = a.misses;
  c.shadow_hits = a.shadow_hits;
  c.actual_mem = a.actual_mem;
  c.target_mem = a.target_mem;
  c.private_mem = a.private_mem;
  c.shared_mem = a.shared_mem;
  c.credits_received = a.credits_received;
  return c;
}

std::uint64_t Arbiter::actual_mem(AppId app) const { return counters(app).actual_mem; }
std::uint64_t Arbiter::target_mem(AppId app) const { return counters(app).target_mem; }
std::uint64_t Arbiter::shared_mem(AppId app) const { return counters(app).shared_mem; }
std::uint64_t Arbiter::shadow_hits(AppId app) const { return counters(app).shadow_hits; }
std::uint64_t Arbiter::credits_received(AppId app) const {
  return counters(app).credits_received;
}

std::uint64_t Arbiter::total_shared_mem() const {
  std::lock_guard<std::mutex> reg(registry_mu_);
  std::uint64_t sum = 0;
  for (const auto& [id, a] : apps_) {
    std::lock_guard<std::mutex> lk(a->mu);
    sum += a->shared_mem;
  }
  return sum;
}

std::uint64_t Arbiter::total_actual_mem() const {
  std::lock_guard<std::mutex> reg(registry_mu_);
  std::uint64_t sum = 0;
  for (const auto& [id, a] : apps_) {
    std::lock_guard<std::mutex> lk(a->mu);
    sum += a->actual_mem;
  }
  return sum;
}

}  // namespace memshare
