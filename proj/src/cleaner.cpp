#include "memshare/cleaner.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace memshare {

Cleaner::Cleaner(LogStore& store, Arbiter& arbiter, const CleanerConfig& config)
    : store_(store),
      arbiter_(arbiter),
      need_fraction_(config.need_fraction),
      tail_drop_threshold_(config.tail_drop_threshold),
      auto_shed_(config.auto_shed),
      rng_(derive_seed(config.seed, 0xc1ea4eull)),
      segments_per_pass_(config.segments_per_pass) {
  if (need_fraction_ < 0.0 || need_fraction_ > 1.0)
    throw ConfigError("need_fraction must be in [0, 1]");
  if (segments_per_pass_ < 1) throw ConfigError("segments_per_pass must be >= 1");
}

void Cleaner::set_segments_per_pass(std::uint32_t n) {
  std::lock_guard<std::mutex> lk(mu_);
  segments_per_pass_ = std::max<std::uint32_t>(1, n);
}

std::uint32_t Cleaner::segments_per_pass() const {
  std::lock_guard<std::mutex> lk(mu_);
  return segments_per_pass_;
}

std::vector<SegmentId> Cleaner::select_segments(std::size_t n) {
  std::vector<SegmentId> sealed = store_.sealed_segment_ids();
  if (sealed.size() < 2) throw NotEnoughSegmentsError("fewer than 2 sealed segments");
  std::size_t n_eff = std::min(n, sealed.size());

  // Per-app needs are sampled once; scores sum app live bytes weighted by
  // 1/need, so over-provisioned apps (low need) dominate the score.
  std::map<AppId, double> needs;
  struct Scored {
    SegmentId id;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(sealed.size());
  for (SegmentId id : sealed) {
    double score = 0;
    for (const auto& [app, bytes] : store_.segment_app_live(id)) {
      auto it = needs.find(app);
      if (it == needs.end()) it = needs.emplace(app, arbiter_.need(app)).first;
      score += static_cast<double>(bytes) / it->second;
    }
    scored.push_back({id, score});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });

  std::size_t by_score = static_cast<std::size_t>(
      std::ceil(need_fraction_ * static_cast<double>(n_eff)));
  by_score = std::min(by_score, n_eff);

  std::vector<SegmentId> chosen;
  chosen.reserve(n_eff);
  for (std::size_t i = 0; i < by_score; ++i) chosen.push_back(scored[i].id);
  std::vector<SegmentId> rest;
  for (std::size_t i = by_score; i < scored.size(); ++i) rest.push_back(scored[i].id);
  {
    std::lock_guard<std::mutex> lk(mu_);
    while (chosen.size() < n_eff && !rest.empty()) {
      std::size_t pick = static_cast<std::size_t>(rng_.bounded(rest.size()));
      chosen.push_back(rest[pick]);
      rest[pick] = rest.back();
      rest.pop_back();
    }
  }
  std::sort(chosen.begin(), chosen.end());
  if (!store_.claim_for_cleaning(chosen))
    throw NotEnoughSegmentsError("selected segments raced with another pass");
  return chosen;
}

PassReport Cleaner::clean_pass(std::vector<SegmentId> inputs, Timestamp now) {
  PassReport report;
  report.inputs = inputs;
  report.at = now;

  // Direct calls may pass still-sealed segments; claim them here.
  {
    std::vector<SegmentId> unclaimed;
    for (SegmentId id : inputs)
      if (store_.segment_state(id) == SegmentState::Sealed) unclaimed.push_back(id);
    if (!unclaimed.empty() && !store_.claim_for_cleaning(unclaimed))
      throw NotEnoughSegmentsError("inputs are not sealed");
  }

  // Snapshot the live records. Rank and last-access are frozen at pass start;
  // accesses during the pass do not reorder candidates.
  std::map<AppId, std::vector<Candidate>> candidates;
  std::map<AppId, std::uint64_t> candidate_bytes;
  std::uint64_t seq = 0;
  for (SegmentId id : inputs) {
    for (const RecordView& rec : store_.scan_segment(id)) {
      LogLocation loc{id, rec.offset};
      auto entry = store_.liveness_check(rec.app_id, rec.key, loc);
      if (!entry) continue;  // dead records are never relocated
      Candidate c;
      c.view = rec;
      c.loc = loc;
      c.t = entry->last_access;
      c.f = entry->frequency;
      c.rank = arbiter_.rank(rec.app_id, c.t, c.f);
      c.seq = seq++;
      candidates[rec.app_id].push_back(c);
      candidate_bytes[rec.app_id] += rec.total_size;
      report.candidate_bytes += rec.total_size;
    }
  }

  // Provisional accounting: candidates leave actualMem up front and return on
  // relocation, so need reflects the pass in progress.
  for (const auto& [app, bytes] : candidate_bytes) arbiter_.pass_subtract(app, bytes);

  // Ascending sort, consumed from the back: max rank first, ties to larger
  // last-access, then to later scan order.
  for (auto& [app, vec] : candidates) {
    std::sort(vec.begin(), vec.end(), [](const Candidate& a, const Candidate& b) {
      if (!(a.rank == b.rank)) return a.rank < b.rank;
      if (a.t != b.t) return a.t < b.t;
      return a.seq < b.seq;
    });
  }

  const std::uint64_t residual =
      (inputs.size() - 1) * static_cast<std::uint64_t>(store_.data_capacity());
  const std::size_t max_outputs = inputs.size() - 1;
  std::vector<SegmentId> outputs;
  std::optional<SegmentId> current;
  std::uint64_t current_used = 0;
  bool out_of_outputs = false;

  while (!out_of_outputs) {
    // App with the maximum need among those with remaining candidates; ties
    // go to the smaller app id (map order).
    AppId best_app = 0;
    double best_need = -1.0;
    bool found = false;
    for (const auto& [app, vec] : candidates) {
      if (vec.empty()) continue;
      double need = arbiter_.need(app);
      if (!found || need > best_need) {
        found = true;
        best_need = need;
        best_app = app;
      }
    }
    if (!found) break;

    auto& vec = candidates[best_app];
    const Candidate& top = vec.back();
    if (report.relocated_bytes + top.view.total_size > residual) break;

    if (!current || current_used + top.view.total_size > store_.data_capacity()) {
      if (current) {
        store_.seal_segment(*current);
        outputs.push_back(*current);
        current.reset();
        current_used = 0;
      }
      if (outputs.size() >= max_outputs) break;
      current = store_.acquire_output_segment();
      if (!current) {
        out_of_outputs = true;
        break;
      }
    }

    LogLocation new_loc = store_.write_relocated(*current, top.view);
    current_used += top.view.total_size;
    report.relocated_bytes += top.view.total_size;
    // On publish failure the key was overwritten or deleted mid-pass and that
    // path already accounted for it; restoring here repairs the provisional
    // subtraction either way.
    store_.publish_relocation(best_app, top.view.key, top.loc, new_loc,
                              top.view.total_size);
    arbiter_.pass_restore(best_app, top.view.total_size);
    vec.pop_back();
  }

  if (current) {
    store_.seal_segment(*current);
    outputs.push_back(*current);
    current.reset();
  }

  // Everything left is evicted: index entries removed, the arbiter notified
  // with one batch per app.
  for (auto& [app, vec] : candidates) {
    std::vector<Arbiter::EvictionItem> batch;
    for (const Candidate& c : vec) {
      if (!store_.remove_index_if_at(app, c.view.key, c.loc)) {
        arbiter_.pass_restore(app, c.view.total_size);
        continue;
      }
      EvictedRecord ev;
      ev.app = app;
      ev.key.assign(c.view.key);
      ev.key_hash = hash_key(c.view.key);
      ev.length = c.view.total_size;
      ev.last_access = c.t;
      report.evicted_bytes += c.view.total_size;
      batch.push_back({ev.key_hash, ev.length, ev.last_access});
      report.evicted.push_back(std::move(ev));
    }
    if (!batch.empty()) arbiter_.apply_eviction_batch(app, batch);
  }

  if (tail_drop_threshold_ > 0.0)
    report.tail_dropped = drop_underutilized_tail(outputs, tail_drop_threshold_, report);

  // Inputs (and a dropped tail) retire at the current epoch, then the epoch
  // advances; reuse waits for in-flight requests from older epochs.
  std::uint64_t epoch = store_.current_epoch();
  for (SegmentId id : inputs) store_.retire_segment(id, epoch);
  store_.advance_epoch();
  store_.reclaim_retired();

  report.outputs = outputs;
  report.freed_segments = inputs.size() - outputs.size();
  assert(report.freed_segments >= 1);

  {
    std::lock_guard<std::mutex> lk(mu_);
    total_relocated_ += report.relocated_bytes;
    total_evicted_ += report.evicted_bytes;
    total_freed_ += report.freed_segments;
    total_passes_ += 1;
    bandwidth_log_.emplace_back(now, report.relocated_bytes);
    while (bandwidth_log_.size() > 100000) bandwidth_log_.pop_front();
  }
  if (observer_) observer_(report);
  return report;
}

bool Cleaner::drop_underutilized_tail(std::vector<SegmentId>& outputs, double threshold,
                                      PassReport& report) {
  if (outputs.empty() || threshold <= 0.0) return false;
  SegmentId tail = outputs.back();
  double utilization = static_cast<double>(store_.segment_write_offset(tail)) /
                       static_cast<double>(store_.data_capacity());
  if (utilization >= threshold) return false;

  std::map<AppId, std::vector<Arbiter::EvictionItem>> batches;
  for (const RecordView& rec : store_.scan_segment(tail)) {
    LogLocation loc{tail, rec.offset};
    auto entry = store_.liveness_check(rec.app_id, rec.key, loc);
    if (!entry) continue;
    if (!store_.remove_index_if_at(rec.app_id, rec.key, loc)) continue;
    EvictedRecord ev;
    ev.app = rec.app_id;
    ev.key.assign(rec.key);
    ev.key_hash = hash_key(rec.key);
    ev.length = rec.total_size;
    ev.last_access = entry->last_access;
    report.evicted_bytes += rec.total_size;
    batches[rec.app_id].push_back({ev.key_hash, ev.length, ev.last_access});
    report.evicted.push_back(std::move(ev));
    // These bytes were restored when relocated into the tail; a tail-drop
    // eviction must take them back out.
    arbiter_.pass_subtract(rec.app_id, rec.total_size);
  }
  for (const auto& [app, batch] : batches) arbiter_.apply_eviction_batch(app, batch);

  store_.retire_segment(tail, store_.current_epoch());
  outputs.pop_back();
  return true;
}

std::optional<PassReport> Cleaner::run_pass(Timestamp now) {
  std::vector<SegmentId> inputs;
  try {
    inputs = select_segments(segments_per_pass());
  } catch (const NotEnoughSegmentsError&) {
    return std::nullopt;
  }
  return clean_pass(std::move(inputs), now);
}

std::size_t Cleaner::clean_until_target(Timestamp now) {
  std::size_t passes = 0;
  const std::size_t pass_bound = store_.total_segments() * 2 + 4;
  while (store_.needs_cleaning() && passes < pass_bound) {
    store_.reclaim_retired();
    if (!store_.needs_cleaning()) break;
    auto report = run_pass(now);
    if (!report) break;
    ++passes;
    if (auto_shed_ && store_.needs_cleaning() && segments_per_pass() > 2)
      set_segments_per_pass(segments_per_pass() / 2);
  }
  return passes;
}

double Cleaner::bandwidth_bytes_per_sec(Timestamp window, Timestamp now) const {
  if (window == 0) return 0.0;
  std::lock_guard<std::mutex> lk(mu_);
  Timestamp from = now >= window ? now - window : 0;
  std::uint64_t sum = 0;
  for (const auto& [ts, bytes] : bandwidth_log_)
    if (ts > from && ts <= now) sum += bytes;
  // Each relocated byte is read once and written once.
  return 2.0 * static_cast<double>(sum) /
         (static_cast<double>(window) / static_cast<double>(kMicrosPerSecond));
}

std::uint64_t Cleaner::total_relocated_bytes() const {
  std::lock_guard<std::mutex> lk(mu_);
  return total_relocated_;
}

std::uint64_t Cleaner::total_evicted_bytes() const {
  std::lock_guard<std::mutex> lk(mu_);
  return total_evicted_;
}

std::uint64_t Cleaner::total_freed_segments() const {
  std::lock_guard<std::mutex> lk(mu_);
  return total_freed_;
}

std::size_t Cleaner::total_passes() const {
  std::lock_guard<std::mutex> lk(mu_);
  return total_passes_;
}

void Cleaner::set_pass_observer(std::function<void(const PassReport&)> fn) {
  observer_ = std::move(fn);
}

}  // namespace memshare
