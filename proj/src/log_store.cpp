#include "memshare/log_store.hpp"

#include <algorithm>
#include <cassert>
#include <thread>

namespace memshare {

EpochGuard& EpochGuard::operator=(EpochGuard&& other) noexcept {
  if (this != &other) {
    if (store_) store_->release_slot(slot_);
    store_ = other.store_;
    slot_ = other.slot_;
    epoch_ = other.epoch_;
    other.store_ = nullptr;
  }
  return *this;
}

EpochGuard::~EpochGuard() {
  if (store_) store_->release_slot(slot_);
}

LogStore::LogStore(const LogStoreConfig& config)
    : segment_size_(config.segment_size_bytes),
      data_capacity_(config.segment_size_bytes),
      blocking_(config.blocking),
      epoch_slots_(config.epoch_slots) {
  if (segment_size_ < 64) throw ConfigError("segment_size_bytes too small");
  std::size_t count = config.total_memory_bytes / segment_size_;
  if (count < 2) throw ConfigError("total_memory_bytes must hold at least 2 segments");
  if (config.free_pool_target_fraction < 0 || config.free_pool_target_fraction >= 1.0)
    throw ConfigError("free_pool_target_fraction must be in [0, 1)");
  double raw = config.free_pool_target_fraction * static_cast<double>(count);
  free_target_ = std::max<std::size_t>(2, static_cast<std::size_t>(raw) +
                                              (raw > static_cast<std::size_t>(raw) ? 1 : 0));

  arena_ = std::make_unique<char[]>(count * static_cast<std::uint64_t>(segment_size_));
  segments_ = std::vector<SegmentMeta>(count);

  std::size_t shards = 1;
  while (shards < config.index_shards) shards <<= 1;
  shards_ = std::vector<Shard>(shards);
  shard_mask_ = shards - 1;

  head_ = 0;
  segments_[0].state = SegmentState::Head;
  free_list_.reserve(count - 1);
  for (SegmentId id = static_cast<SegmentId>(count) - 1; id >= 1; --id)
    free_list_.push_back(id);
  for (auto& slot : epoch_slots_) slot.store(0, std::memory_order_relaxed);
}

SegmentId LogStore::pop_free_locked(std::unique_lock<std::mutex>& lk) {
  while (free_list_.empty()) {
    if (!blocking_) throw OutOfMemoryError("free segment pool exhausted");
    free_available_.wait(lk);
  }
  SegmentId id = free_list_.back();
  free_list_.pop_back();
  return id;
}

LogLocation LogStore::write_to_head(AppId app, std::string_view key,
                                    std::string_view value) {
  const std::uint64_t total = record_total_size(key.size(), value.size());
  SegmentId seg;
  std::uint32_t offset;
  {
    std::unique_lock<std::mutex> lk(lists_mu_);
    SegmentMeta* head = &segments_[head_];
    if (head->write_offset + total > data_capacity_) {
      head->state = SegmentState::Sealed;
      head_ = pop_free_locked(lk);
      head = &segments_[head_];
      head->state = SegmentState::Head;
      assert(head->write_offset == 0 && head->live_bytes == 0);
    }
    seg = head_;
    offset = head->write_offset;
    head->write_offset += static_cast<std::uint32_t>(total);
    head->record_count += 1;
  }

  char* dst = segment_data(seg) + offset;
  RecordHeader hdr{app, static_cast<std::uint32_t>(key.size()),
                   static_cast<std::uint32_t>(value.size())};
  std::memcpy(dst, &hdr.app_id, 4);
  std::memcpy(dst + 4, &hdr.key_len, 4);
  std::memcpy(dst + 8, &hdr.value_len, 4);
  std::memcpy(dst + kRecordHeaderSize, key.data(), key.size());
  std::memcpy(dst + kRecordHeaderSize + key.size(), value.data(), value.size());
  return LogLocation{seg, offset};
}

AppendResult LogStore::append(AppId app, std::string_view key, std::string_view value,
                              Timestamp now) {
  const std::uint64_t total = record_total_size(key.size(), value.size());
  if (total > data_capacity_)
    throw OversizeObjectError("record of " + std::to_string(total) +
                              " bytes exceeds segment capacity");

  AppendResult res;
  res.loc = write_to_head(app, key, value);
  res.total_size = static_cast<std::uint32_t>(total);

  LogLocation old_loc;
  {
    Shard& sh = shard_for(app, key);
    std::lock_guard<std::mutex> lk(sh.mu);
    auto [it, inserted] =
        sh.map.try_emplace(IndexKey{app, std::string(key)}, IndexEntry{res.loc, now, 1});
    if (!inserted) {
      res.overwrote = true;
      res.old_last_access = it->second.last_access;
      old_loc = it->second.loc;
      it->second = IndexEntry{res.loc, now, 1};
    }
  }
  if (res.overwrote) {
    RecordView old = decode_at(old_loc.segment_id, old_loc.offset);
    res.old_total_size = old.total_size;
    mark_dead(old_loc, app, old.total_size);
  }
  {
    SegmentMeta& meta = segments_[res.loc.segment_id];
    std::lock_guard<std::mutex> lk(meta.mu);
    meta.live_bytes += total;
    meta.app_live[app] += total;
  }
  return res;
}

std::optional<LookupResult> LogStore::lookup(AppId app, std::string_view key,
                                             Timestamp now) {
  EpochGuard guard = epoch_guard();
  LogLocation loc;
  LookupResult res;
  {
    Shard& sh = shard_for(app, key);
    std::lock_guard<std::mutex> lk(sh.mu);
    auto it = sh.map.find(IndexKey{app, std::string(key)});
    if (it == sh.map.end()) return std::nullopt;
    res.old_last_access = it->second.last_access;
    it->second.last_access = std::max(it->second.last_access, now);
    it->second.frequency += 1;
    res.frequency = it->second.frequency;
    loc = it->second.loc;
  }
  RecordView rec = decode_at(loc.segment_id, loc.offset);
  res.value.assign(rec.value);
  res.total_size = rec.total_size;
  return res;
}

RemoveResult LogStore::remove(AppId app, std::string_view key) {
  RemoveResult res;
  LogLocation loc;
  std::uint32_t total = 0;
  {
    Shard& sh = shard_for(app, key);
    std::lock_guard<std::mutex> lk(sh.mu);
    auto it = sh.map.find(IndexKey{app, std::string(key)});
    if (it == sh.map.end()) return res;
    res.removed = true;
    res.last_access = it->second.last_access;
    loc = it->second.loc;
    sh.map.erase(it);
  }
  RecordView rec = decode_at(loc.segment_id, loc.offset);
  total = rec.total_size;
  res.total_size = total;
  mark_dead(loc, app, total);
  return res;
}

void LogStore::mark_dead(const LogLocation& loc, AppId app, std::uint32_t total_size) {
  SegmentMeta& meta = segments_[loc.segment_id];
  std::lock_guard<std::mutex> lk(meta.mu);
  assert(meta.live_bytes >= total_size);
  meta.live_bytes -= total_size;
  auto it = meta.app_live.find(app);
  if (it != meta.app_live.end()) {
    it->second -= std::min<std::uint64_t>(it->second, total_size);
    if (it->second == 0) meta.app_live.erase(it);
  }
}

RecordView LogStore::decode_at(SegmentId seg, std::uint32_t offset) const {
  const char* p = segment_data(seg) + offset;
  RecordHeader hdr;
  std::memcpy(&hdr.app_id, p, 4);
  std::memcpy(&hdr.key_len, p + 4, 4);
  std::memcpy(&hdr.value_len, p + 8, 4);
  RecordView rec;
  rec.app_id = hdr.app_id;
  rec.key = std::string_view(p + kRecordHeaderSize, hdr.key_len);
  rec.value = std::string_view(p + kRecordHeaderSize + hdr.key_len, hdr.value_len);
  rec.offset = offset;
  rec.total_size = static_cast<std::uint32_t>(record_total_size(hdr.key_len, hdr.value_len));
  return rec;
}

// -- epochs -------------------------------------------------------------------

EpochGuard LogStore::epoch_guard() {
  for (int attempt = 0; attempt < 1024; ++attempt) {
    for (std::size_t i = 0; i < epoch_slots_.size(); ++i) {
      std::uint64_t expected = 0;
      std::uint64_t e = epoch_.load(std::memory_order_acquire);
      if (epoch_slots_[i].compare_exchange_strong(expected, e)) {
        return EpochGuard(this, i, e);
      }
    }
    std::this_thread::yield();
  }
  throw std::runtime_error("epoch slot pool exhausted");
}

void LogStore::release_slot(std::size_t slot) {
  epoch_slots_[slot].store(0, std::memory_order_release);
}

std::uint64_t LogStore::min_inflight_epoch() const {
  std::uint64_t m = UINT64_MAX;
  for (const auto& slot : epoch_slots_) {
    std::uint64_t e = slot.load(std::memory_order_acquire);
    if (e != 0) m = std::min(m, e);
  }
  return m;
}

bool LogStore::try_reclaim(SegmentId id) {
  SegmentMeta& meta = segments_[id];
  {
    std::lock_guard<std::mutex> lk(lists_mu_);
    if (meta.state != SegmentState::Retired) return false;
    if (min_inflight_epoch() <= meta.retire_epoch) return false;
    assert(meta.live_bytes == 0);
    meta.state = SegmentState::Free;
    meta.write_offset = 0;
    meta.record_count = 0;
    meta.retire_epoch = 0;
    {
      std::lock_guard<std::mutex> mlk(meta.mu);
      meta.app_live.clear();
    }
    free_list_.push_back(id);
  }
  free_available_.notify_all();
  return true;
}

std::size_t LogStore::reclaim_retired() {
  std::size_t n = 0;
  for (SegmentId id = 0; id < segments_.size(); ++id) {
    if (segments_[id].state == SegmentState::Retired && try_reclaim(id)) ++n;
  }
  return n;
}

// -- geometry -----------------------------------------------------------------

std::size_t LogStore::free_segments() const {
  std::lock_guard<std::mutex> lk(lists_mu_);
  return free_list_.size();
}

std::uint64_t LogStore::live_bytes_total() const {
  std::uint64_t sum = 0;
  for (const auto& meta : segments_) {
    std::lock_guard<std::mutex> lk(meta.mu);
    sum += meta.live_bytes;
  }
  return sum;
}

std::size_t LogStore::used_segments() const {
  std::lock_guard<std::mutex> lk(lists_mu_);
  std::size_t n = 0;
  for (const auto& meta : segments_)
    if (meta.state != SegmentState::Free) ++n;
  return n;
}

SegmentState LogStore::segment_state(SegmentId id) const {
  std::lock_guard<std::mutex> lk(lists_mu_);
  return segments_[id].state;
}

std::uint32_t LogStore::segment_write_offset(SegmentId id) const {
  return segments_[id].write_offset;
}

std::uint64_t LogStore::segment_live_bytes(SegmentId id) const {
  std::lock_guard<std::mutex> lk(segments_[id].mu);
  return segments_[id].live_bytes;
}

std::uint64_t LogStore::segment_retire_epoch(SegmentId id) const {
  return segments_[id].retire_epoch;
}

std::map<AppId, std::uint64_t> LogStore::segment_app_live(SegmentId id) const {
  std::lock_guard<std::mutex> lk(segments_[id].mu);
  return segments_[id].app_live;
}

// -- cleaner interface ----------------------------------------------------------

std::vector<SegmentId> LogStore::sealed_segment_ids() const {
  std::lock_guard<std::mutex> lk(lists_mu_);
  std::vector<SegmentId> out;
  for (SegmentId id = 0; id < segments_.size(); ++id)
    if (segments_[id].state == SegmentState::Sealed) out.push_back(id);
  return out;
}

bool LogStore::claim_for_cleaning(const std::vector<SegmentId>& ids) {
  std::lock_guard<std::mutex> lk(lists_mu_);
  for (SegmentId id : ids)
    if (segments_[id].state != SegmentState::Sealed) return false;
  for (SegmentId id : ids) segments_[id].state = SegmentState::Cleaning;
  return true;
}

std::optional<SegmentId> LogStore::acquire_output_segment() {
  std::lock_guard<std::mutex> lk(lists_mu_);
  if (free_list_.empty()) return std::nullopt;
  SegmentId id = free_list_.back();
  free_list_.pop_back();
  segments_[id].state = SegmentState::Cleaning;
  return id;
}

std::vector<RecordView> LogStore::scan_segment(SegmentId id) const {
  // Assumes no concurrent appends into this segment (Sealed/Cleaning, or a
  // quiescent store).
  std::vector<RecordView> out;
  const SegmentMeta& meta = segments_[id];
  std::uint32_t end = meta.write_offset;
  std::uint32_t off = 0;
  while (off < end) {
    RecordView rec = decode_at(id, off);
    out.push_back(rec);
    off += rec.total_size;
  }
  return out;
}

std::optional<IndexEntry> LogStore::liveness_check(AppId app, std::string_view key,
                                                   const LogLocation& loc) const {
  auto entry = peek_entry(app, key);
  if (entry && entry->loc == loc) return entry;
  return std::nullopt;
}

LogLocation LogStore::write_relocated(SegmentId output, const RecordView& rec) {
  SegmentMeta& meta = segments_[output];
  assert(meta.write_offset + rec.total_size <= data_capacity_);
  // Record bytes are contiguous: the key view starts kRecordHeaderSize past
  // the record start.
  const char* src = rec.key.data() - kRecordHeaderSize;
  std::uint32_t offset = meta.write_offset;
  std::memcpy(segment_data(output) + offset, src, rec.total_size);
  meta.write_offset += rec.total_size;
  meta.record_count += 1;
  return LogLocation{output, offset};
}

bool LogStore::publish_relocation(AppId app, std::string_view key,
                                  const LogLocation& old_loc, const LogLocation& new_loc,
                                  std::uint32_t total_size) {
  {
    Shard& sh = shard_for(app, key);
    std::lock_guard<std::mutex> lk(sh.mu);
    auto it = sh.map.find(IndexKey{app, std::string(key)});
    if (it == sh.map.end() || !(it->second.loc == old_loc)) return false;
    it->second.loc = new_loc;
  }
  mark_dead(old_loc, app, total_size);
  SegmentMeta& meta = segments_[new_loc.segment_id];
  std::lock_guard<std::mutex> lk(meta.mu);
  meta.live_bytes += total_size;
  meta.app_live[app] += total_size;
  return true;
}

bool LogStore::remove_index_if_at(AppId app, std::string_view key,
                                  const LogLocation& loc) {
  {
    Shard& sh = shard_for(app, key);
    std::lock_guard<std::mutex> lk(sh.mu);
    auto it = sh.map.find(IndexKey{app, std::string(key)});
    if (it == sh.map.end() || !(it->second.loc == loc)) return false;
    sh.map.erase(it);
  }
  RecordView rec = decode_at(loc.segment_id, loc.offset);
  mark_dead(loc, rec.app_id, rec.total_size);
  return true;
}

void LogStore::seal_segment(SegmentId id) {
  std::lock_guard<std::mutex> lk(lists_mu_);
  segments_[id].state = SegmentState::Sealed;
}

void LogStore::retire_segment(SegmentId id, std::uint64_t epoch) {
  std::lock_guard<std::mutex> lk(lists_mu_);
  segments_[id].state = SegmentState::Retired;
  segments_[id].retire_epoch = epoch;
}

// -- low-level read path ---------------------------------------------------------

std::optional<IndexEntry> LogStore::peek_entry(AppId app, std::string_view key) const {
  const Shard& sh = shard_for(app, key);
  std::lock_guard<std::mutex> lk(sh.mu);
  auto it = sh.map.find(IndexKey{app, std::string(key)});
  if (it == sh.map.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> LogStore::read_value_at(const LogLocation& loc, AppId app,
                                                   std::string_view key) const {
  RecordView rec = decode_at(loc.segment_id, loc.offset);
  if (rec.app_id != app || rec.key != key) return std::nullopt;
  return std::string(rec.value);
}

// -- audits -----------------------------------------------------------------------

bool LogStore::audit_live_bytes() const {
  for (SegmentId id = 0; id < segments_.size(); ++id) {
    const SegmentMeta& meta = segments_[id];
    if (meta.state == SegmentState::Free) continue;
    std::uint64_t live = 0;
    std::map<AppId, std::uint64_t> app_live;
    for (const RecordView& rec : scan_segment(id)) {
      auto entry = liveness_check(rec.app_id, rec.key, LogLocation{id, rec.offset});
      if (entry) {
        live += rec.total_size;
        app_live[rec.app_id] += rec.total_size;
      }
    }
    std::lock_guard<std::mutex> lk(meta.mu);
    if (meta.live_bytes != live || meta.app_live != app_live) return false;
  }
  return true;
}

}  // namespace memshare
