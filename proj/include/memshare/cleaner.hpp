#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "memshare/arbiter.hpp"
#include "memshare/log_store.hpp"
#include "memshare/rng.hpp"

namespace memshare {

struct CleanerConfig {
  std::uint32_t segments_per_pass = 100;
  double need_fraction = 0.5;          // share of inputs chosen by score, rest random
  double tail_drop_threshold = 0.5;    // 0 disables the tail drop
  std::uint64_t seed = 1;
  bool auto_shed = false;              // halve n when a full pass leaves the pool low
};

struct EvictedRecord {
  AppId app = 0;
  std::string key;
  std::uint64_t key_hash = 0;
  std::uint32_t length = 0;
  Timestamp last_access = 0;
};

struct PassReport {
  std::vector<SegmentId> inputs;
  std::vector<SegmentId> outputs;      // sealed survivor segments, tail drop applied
  std::uint64_t candidate_bytes = 0;   // live bytes in inputs at pass start
  std::uint64_t relocated_bytes = 0;
  std::uint64_t evicted_bytes = 0;
  std::vector<EvictedRecord> evicted;
  std::size_t freed_segments = 0;
  bool tail_dropped = false;
  Timestamp at = 0;
};

// Reclamation: takes n segments, rewrites the most valuable records into at
// most n-1 fresh segments in (need, rank) priority order, evicts the rest,
// and always frees at least one segment.
class Cleaner {
 public:
  Cleaner(LogStore& store, Arbiter& arbiter, const CleanerConfig& config);

  // ceil(need_fraction * n) segments maximizing
  //   score(seg) = sum over live records of total_size / need(app)
  // plus the remainder uniformly at random without replacement. Selected
  // segments are claimed (Sealed -> Cleaning). Throws NotEnoughSegmentsError
  // when fewer than 2 segments are sealed.
  std::vector<SegmentId> select_segments(std::size_t n);

  PassReport clean_pass(std::vector<SegmentId> inputs, Timestamp now);

  // select + clean; nullopt when there is nothing to clean.
  std::optional<PassReport> run_pass(Timestamp now);

  // Runs passes until the free pool is back at its target or nothing more can
  // be cleaned. Simulator entry point (invoked inline before a SET).
  std::size_t clean_until_target(Timestamp now);

  // Drops the last output segment when it is filled below the threshold; its
  // records count as evictions. Outputs are filled in descending (need, rank)
  // priority so the tail holds the least valuable survivors.
  bool drop_underutilized_tail(std::vector<SegmentId>& outputs, double threshold,
                               PassReport& report);

  void set_segments_per_pass(std::uint32_t n);
  std::uint32_t segments_per_pass() const;

  // Cleaner memory traffic over the trailing window: relocated bytes counted
  // once for the read and once for the write.
  double bandwidth_bytes_per_sec(Timestamp window, Timestamp now) const;
  std::uint64_t total_relocated_bytes() const;
  std::uint64_t total_evicted_bytes() const;
  std::uint64_t total_freed_segments() const;
  std::size_t total_passes() const;

  // Invoked with every completed pass report (tests, metrics series).
  void set_pass_observer(std::function<void(const PassReport&)> fn);

 private:
  struct Candidate {
    RecordView view;
    LogLocation loc;
    Timestamp t = 0;
    std::uint32_t f = 0;
    RankValue rank;
    std::uint64_t seq = 0;
  };

  LogStore& store_;
  Arbiter& arbiter_;
  double need_fraction_;
  double tail_drop_threshold_;
  bool auto_shed_;
  Rng rng_;

  mutable std::mutex mu_;
  std::uint32_t segments_per_pass_;
  std::deque<std::pair<Timestamp, std::uint64_t>> bandwidth_log_;
  std::uint64_t total_relocated_ = 0;
  std::uint64_t total_evicted_ = 0;
  std::uint64_t total_freed_ = 0;
  std::size_t total_passes_ = 0;
  std::function<void(const PassReport&)> observer_;
};

}  // namespace memshare
