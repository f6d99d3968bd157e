#pragma once

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "memshare/common.hpp"

namespace memshare {

enum class SegmentState : std::uint8_t { Free, Head, Sealed, Cleaning, Retired };

struct LogLocation {
  SegmentId segment_id = 0;
  std::uint32_t offset = 0;  // relative to the segment's data area
  bool operator==(const LogLocation&) const = default;
};

// On-log record layout: app id, key length, value length, then key and value
// bytes. Lengths precede payloads so a segment can be scanned without the
// index. Last-access time and frequency live in the index entry; log bytes
// are immutable once written.
struct RecordHeader {
  AppId app_id;
  std::uint32_t key_len;
  std::uint32_t value_len;
};
inline constexpr std::uint32_t kRecordHeaderSize = 12;

inline std::uint64_t record_total_size(std::size_t key_len, std::size_t value_len) {
  return kRecordHeaderSize + key_len + value_len;
}

// Decoded view of a record inside a segment's data area. Views point into the
// arena and stay valid while the segment is not reused.
struct RecordView {
  AppId app_id;
  std::string_view key;
  std::string_view value;
  std::uint32_t offset;
  std::uint32_t total_size;
};

struct IndexEntry {
  LogLocation loc;
  Timestamp last_access = 0;
  std::uint32_t frequency = 0;
};

struct AppendResult {
  LogLocation loc;
  std::uint32_t total_size = 0;
  bool overwrote = false;
  std::uint32_t old_total_size = 0;
  Timestamp old_last_access = 0;
};

struct LookupResult {
  std::string value;
  std::uint32_t total_size = 0;
  Timestamp old_last_access = 0;  // before this lookup bumped it
  std::uint32_t frequency = 0;    // after the bump
};

struct RemoveResult {
  bool removed = false;
  std::uint32_t total_size = 0;
  Timestamp last_access = 0;
};

struct LogStoreConfig {
  std::uint64_t total_memory_bytes = 64ull << 20;
  std::uint32_t segment_size_bytes = 1048576;
  double free_pool_target_fraction = 0.01;
  bool blocking = false;      // server mode: appends wait for free segments
  std::size_t index_shards = 64;
  std::size_t epoch_slots = 256;
};

class LogStore;

// Tags a request with the epoch it started in. A retired segment is reused
// only once every slot holds an epoch strictly greater than its retire epoch.
class EpochGuard {
 public:
  EpochGuard() = default;
  EpochGuard(LogStore* store, std::size_t slot, std::uint64_t epoch)
      : store_(store), slot_(slot), epoch_(epoch) {}
  EpochGuard(EpochGuard&& other) noexcept { *this = std::move(other); }
  EpochGuard& operator=(EpochGuard&& other) noexcept;
  EpochGuard(const EpochGuard&) = delete;
  EpochGuard& operator=(const EpochGuard&) = delete;
  ~EpochGuard();

  std::uint64_t epoch() const { return epoch_; }

 private:
  LogStore* store_ = nullptr;
  std::size_t slot_ = 0;
  std::uint64_t epoch_ = 0;
};

class LogStore {
 public:
  explicit LogStore(const LogStoreConfig& config);

  LogStore(const LogStore&) = delete;
  LogStore& operator=(const LogStore&) = delete;

  // -- data path ------------------------------------------------------------

  // Writes the record at the head segment, sealing it and swapping in a free
  // segment when the record does not fit. Throws OversizeObjectError when the
  // record exceeds a segment's data capacity, OutOfMemoryError when the free
  // pool is exhausted in non-blocking mode.
  AppendResult append(AppId app, std::string_view key, std::string_view value,
                      Timestamp now);

  // On hit bumps last-access to max(t, now) and frequency by one.
  std::optional<LookupResult> lookup(AppId app, std::string_view key, Timestamp now);

  RemoveResult remove(AppId app, std::string_view key);

  // -- epochs ---------------------------------------------------------------

  EpochGuard epoch_guard();
  std::uint64_t current_epoch() const { return epoch_.load(std::memory_order_acquire); }
  void advance_epoch() { epoch_.fetch_add(1, std::memory_order_acq_rel); }
  // Retired -> Free iff the minimum epoch among in-flight requests is greater
  // than the segment's retire epoch.
  bool try_reclaim(SegmentId id);
  std::size_t reclaim_retired();

  // -- geometry and counters ------------------------------------------------

  std::uint32_t segment_size() const { return segment_size_; }
  std::uint32_t data_capacity() const { return data_capacity_; }
  std::size_t total_segments() const { return segments_.size(); }
  std::size_t free_segments() const;
  std::size_t free_pool_target() const { return free_target_; }
  bool needs_cleaning() const { return free_segments() < free_target_; }
  std::uint64_t live_bytes_total() const;
  std::size_t used_segments() const;  // anything not Free

  SegmentState segment_state(SegmentId id) const;
  std::uint32_t segment_write_offset(SegmentId id) const;
  std::uint64_t segment_live_bytes(SegmentId id) const;
  std::uint64_t segment_retire_epoch(SegmentId id) const;
  // Live bytes per app, ordered by app id (deterministic iteration).
  std::map<AppId, std::uint64_t> segment_app_live(SegmentId id) const;

  // -- cleaner interface ----------------------------------------------------

  std::vector<SegmentId> sealed_segment_ids() const;
  // Atomically claims sealed segments for a pass (Sealed -> Cleaning).
  // Returns false and claims nothing if any is not Sealed.
  bool claim_for_cleaning(const std::vector<SegmentId>& ids);
  // Pops a free segment to fill with relocated records; returns nullopt when
  // the pool is empty. Pass outputs never block and never trigger appends.
  std::optional<SegmentId> acquire_output_segment();
  std::vector<RecordView> scan_segment(SegmentId id) const;
  // Index entry snapshot iff (app, key) currently resolves to loc.
  std::optional<IndexEntry> liveness_check(AppId app, std::string_view key,
                                           const LogLocation& loc) const;
  // Raw copy of a record into an output segment; returns its new location.
  LogLocation write_relocated(SegmentId output, const RecordView& rec);
  // Points the index at the relocated copy iff it still references old_loc.
  // Updates per-segment live accounting on success.
  bool publish_relocation(AppId app, std::string_view key, const LogLocation& old_loc,
                          const LogLocation& new_loc, std::uint32_t total_size);
  // Drops the index entry iff it still references loc (eviction).
  bool remove_index_if_at(AppId app, std::string_view key, const LogLocation& loc);
  void seal_segment(SegmentId id);            // Head/output -> Sealed
  void retire_segment(SegmentId id, std::uint64_t epoch);  // Cleaning/Sealed -> Retired

  // -- low-level read path (wire server, stress tests) -----------------------

  std::optional<IndexEntry> peek_entry(AppId app, std::string_view key) const;
  // Decodes the record at loc and returns its value bytes iff the header
  // matches (app, key). Caller must hold an EpochGuard taken before the
  // entry was resolved.
  std::optional<std::string> read_value_at(const LogLocation& loc, AppId app,
                                           std::string_view key) const;

  // -- audits (tests) ---------------------------------------------------------

  // Recomputes per-segment live bytes by full scan + index probe and compares
  // with the maintained counters. Returns true when they agree exactly.
  bool audit_live_bytes() const;

 private:
  friend class EpochGuard;

  struct SegmentMeta {
    SegmentState state = SegmentState::Free;
    std::uint32_t write_offset = 0;
    std::uint32_t record_count = 0;
    std::uint64_t live_bytes = 0;
    std::uint64_t retire_epoch = 0;
    std::map<AppId, std::uint64_t> app_live;
    mutable std::mutex mu;
  };

  struct IndexKey {
    AppId app;
    std::string key;
    bool operator==(const IndexKey&) const = default;
  };
  struct IndexKeyHash {
    std::size_t operator()(const IndexKey& k) const {
      return static_cast<std::size_t>(hash_app_key(k.app, k.key));
    }
  };
  struct Shard {
    std::unordered_map<IndexKey, IndexEntry, IndexKeyHash> map;
    mutable std::mutex mu;
  };

  char* segment_data(SegmentId id) {
    return arena_.get() + static_cast<std::uint64_t>(id) * segment_size_;
  }
  const char* segment_data(SegmentId id) const {
    return arena_.get() + static_cast<std::uint64_t>(id) * segment_size_;
  }
  Shard& shard_for(AppId app, std::string_view key) {
    return shards_[hash_app_key(app, key) & shard_mask_];
  }
  const Shard& shard_for(AppId app, std::string_view key) const {
    return shards_[hash_app_key(app, key) & shard_mask_];
  }
  // Writes the record into the current head, swapping heads as needed.
  LogLocation write_to_head(AppId app, std::string_view key, std::string_view value);
  SegmentId pop_free_locked(std::unique_lock<std::mutex>& lk);
  void mark_dead(const LogLocation& loc, AppId app, std::uint32_t total_size);
  RecordView decode_at(SegmentId seg, std::uint32_t offset) const;
  std::uint64_t min_inflight_epoch() const;
  void release_slot(std::size_t slot);

  std::uint32_t segment_size_;
  std::uint32_t data_capacity_;
  std::size_t free_target_;
  bool blocking_;

  std::unique_ptr<char[]> arena_;
  std::vector<SegmentMeta> segments_;

  // Free/sealed bookkeeping; short critical sections at pass boundaries and
  // head swaps.
  mutable std::mutex lists_mu_;
  std::condition_variable free_available_;
  std::vector<SegmentId> free_list_;
  SegmentId head_ = 0;

  std::vector<Shard> shards_;
  std::uint64_t shard_mask_;

  std::atomic<std::uint64_t> epoch_{1};
  std::vector<std::atomic<std::uint64_t>> epoch_slots_;
};

}  // namespace memshare
