#include "memshare/slab_cache.hpp"

#include <algorithm>

namespace memshare {

SlabCache::SlabCache(const EngineConfig& config, SlabMode mode)
    : mode_(mode),
      slab_size_(config.segment_size_bytes),
      total_memory_(config.total_memory_bytes) {
  for (const auto& app : config.apps) {
    PerApp pa;
    pa.cap = app.private_mem_bytes;
    apps_.emplace(app.id, pa);
  }
}

std::uint32_t SlabCache::class_for_size(std::uint64_t bytes, std::uint32_t slab_size) {
  std::uint64_t required = bytes + kSlabItemHeader;
  for (std::uint64_t c = 64; c <= slab_size; c <<= 1) {
    if (c >= required) return static_cast<std::uint32_t>(c);
  }
  throw OversizeObjectError("object of " + std::to_string(bytes) +
                            " bytes exceeds the largest slab class");
}

SlabCache::PerApp& SlabCache::require_app(AppId app) {
  auto it = apps_.find(app);
  if (it == apps_.end()) throw UnknownAppError(app);
  return it->second;
}

GetResult SlabCache::get(AppId app, std::string_view key) {
  PerApp& pa = require_app(app);
  auto it = items_.find(ItemKey{app, std::string(key)});
  GetResult res;
  if (it == items_.end()) {
    pa.misses += 1;
    return res;
  }
  Item& item = it->second;
  ScopeClass& sc = scopes_[{scope_for(app), item.chunk_size}];
  sc.lru.erase(item.lru_it);
  sc.lru.push_front(&item);
  item.lru_it = sc.lru.begin();
  pa.hits += 1;
  res.hit = true;
  res.value = item.value;
  return res;
}

void SlabCache::erase_item(Item* item) {
  ScopeClass& sc = scopes_[{scope_for(item->app), item->chunk_size}];
  sc.lru.erase(item->lru_it);
  sc.free_chunks += 1;
  PerApp& pa = apps_.at(item->app);
  pa.live_bytes -= item->object_size;
  pa.occupied_chunk_bytes -= item->chunk_size;
  items_.erase(ItemKey{item->app, item->key});
}

void SlabCache::evict_from(ScopeClass& sc) {
  Item* victim = sc.lru.back();
  erase_item(victim);
}

void SlabCache::set(AppId app, std::string_view key, std::string_view value) {
  PerApp& pa = require_app(app);
  std::uint32_t cls = class_for_size(value.size(), slab_size_);

  auto it = items_.find(ItemKey{app, std::string(key)});
  if (it != items_.end()) {
    Item& item = it->second;
    if (item.chunk_size == cls) {
      // Same class: reuse the chunk, refresh LRU position.
      pa.live_bytes += value.size();
      pa.live_bytes -= item.object_size;
      item.object_size = static_cast<std::uint32_t>(value.size());
      item.value.assign(value);
      ScopeClass& sc = scopes_[{scope_for(app), cls}];
      sc.lru.erase(item.lru_it);
      sc.lru.push_front(&item);
      item.lru_it = sc.lru.begin();
      return;
    }
    erase_item(&item);
  }

  ScopeClass& sc = scopes_[{scope_for(app), cls}];
  if (sc.free_chunks == 0) {
    bool can_allocate = allocated_total_ + slab_size_ <= total_memory_;
    if (mode_ == SlabMode::Partitioned)
      can_allocate = can_allocate && pa.allocated_slab_bytes + slab_size_ <= pa.cap;
    if (can_allocate) {
      allocated_total_ += slab_size_;
      allocated_by_class_[cls] += slab_size_;
      if (mode_ == SlabMode::Partitioned) pa.allocated_slab_bytes += slab_size_;
      sc.free_chunks += slab_size_ / cls;
    } else {
      if (sc.lru.empty())
        throw OutOfMemoryError("no chunk available in class " + std::to_string(cls));
      evict_from(sc);
    }
  }

  sc.free_chunks -= 1;
  auto [mit, inserted] =
      items_.emplace(ItemKey{app, std::string(key)},
                     Item{app, std::string(key), std::string(value),
                          static_cast<std::uint32_t>(value.size()), cls, {}});
  Item& item = mit->second;
  sc.lru.push_front(&item);
  item.lru_it = sc.lru.begin();
  pa.live_bytes += item.object_size;
  pa.occupied_chunk_bytes += cls;
}

bool SlabCache::del(AppId app, std::string_view key) {
  require_app(app);
  auto it = items_.find(ItemKey{app, std::string(key)});
  if (it == items_.end()) return false;
  erase_item(&it->second);
  return true;
}

StatsSnapshot SlabCache::stats() const {
  StatsSnapshot snap;
  for (const auto& [id, pa] : apps_) {
    AppStats s;
    s.id = id;
    s.hits = pa.hits;
    s.misses = pa.misses;
    s.gets = pa.hits + pa.misses;
    s.hit_rate = s.gets ? static_cast<double>(s.hits) / static_cast<double>(s.gets) : 0.0;
    s.actual_mem = pa.occupied_chunk_bytes;
    s.target_mem = mode_ == SlabMode::Partitioned ? pa.cap : 0;
    s.private_mem = pa.cap;
    snap.per_app.push_back(s);
    snap.total_gets += s.gets;
    snap.total_hits += s.hits;
    snap.live_bytes += pa.live_bytes;
  }
  snap.combined_hit_rate =
      snap.total_gets ? static_cast<double>(snap.total_hits) /
                            static_cast<double>(snap.total_gets)
                      : 0.0;
  snap.total_memory = total_memory_;
  snap.total_segments = total_memory_ / slab_size_;
  snap.free_segments = (total_memory_ - allocated_total_) / slab_size_;
  snap.live_utilization = allocated_total_
                              ? static_cast<double>(snap.live_bytes) /
                                    static_cast<double>(allocated_total_)
                              : 0.0;
  return snap;
}

SlabUtilizationReport SlabCache::utilization_report() const {
  SlabUtilizationReport rep;
  for (const auto& [id, pa] : apps_) {
    rep.live_bytes += pa.live_bytes;
    rep.occupied_chunk_bytes += pa.occupied_chunk_bytes;
  }
  rep.allocated_bytes = allocated_total_;
  rep.fragmentation_fraction =
      rep.occupied_chunk_bytes
          ? 1.0 - static_cast<double>(rep.live_bytes) /
                      static_cast<double>(rep.occupied_chunk_bytes)
          : 0.0;
  return rep;
}

std::map<std::uint32_t, std::uint64_t> SlabCache::allocated_by_class() const {
  return allocated_by_class_;
}

}  // namespace memshare
