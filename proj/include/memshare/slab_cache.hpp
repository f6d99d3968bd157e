#pragma once

#include <list>
#include <map>
#include <string>
#include <unordered_map>

#include "memshare/engine.hpp"

namespace memshare {

enum class SlabMode { Partitioned, GreedyShared };

// Per-item chunk overhead. Chunk sizing takes the object's payload size plus
// this header; 56 B objects land in the 64 B class.
inline constexpr std::uint32_t kSlabItemHeader = 8;

struct SlabUtilizationReport {
  std::uint64_t live_bytes = 0;            // sum of object sizes
  std::uint64_t occupied_chunk_bytes = 0;  // sum of chunk sizes over occupied chunks
  std::uint64_t allocated_bytes = 0;       // whole slabs handed to classes
  double fragmentation_fraction = 0.0;     // 1 - live / occupied chunk bytes
};

// Memcached-style slab allocator baseline with power-of-two classes
// (64 * 2^i, capped at the slab size) and LRU queues either per (app, class)
// with a per-app memory cap, or shared per class across all apps. Slabs are
// never reassigned across classes once allocated.
class SlabCache : public CacheInterface {
 public:
  SlabCache(const EngineConfig& config, SlabMode mode);

  GetResult get(AppId app, std::string_view key) override;
  void set(AppId app, std::string_view key, std::string_view value) override;
  bool del(AppId app, std::string_view key) override;
  StatsSnapshot stats() const override;
  void tick(Timestamp now) override { now_ = std::max(now_, now); }
  Timestamp now() const override { return now_; }

  // Smallest class whose chunk holds bytes + header. Throws
  // OversizeObjectError when no class fits.
  static std::uint32_t class_for_size(std::uint64_t bytes,
                                      std::uint32_t slab_size = 1048576);

  SlabUtilizationReport utilization_report() const;
  // Slab bytes handed to each class so far (never decreases).
  std::map<std::uint32_t, std::uint64_t> allocated_by_class() const;

 private:
  struct Item {
    AppId app;
    std::string key;
    std::string value;
    std::uint32_t object_size = 0;
    std::uint32_t chunk_size = 0;
    std::list<Item*>::iterator lru_it;
  };
  struct ItemKey {
    AppId app;
    std::string key;
    bool operator==(const ItemKey&) const = default;
  };
  struct ItemKeyHash {
    std::size_t operator()(const ItemKey& k) const {
      return static_cast<std::size_t>(hash_app_key(k.app, k.key));
    }
  };
  // Eviction scope: (owning app, class) when partitioned, (0, class) shared.
  using ScopeKey = std::pair<AppId, std::uint32_t>;
  struct ScopeClass {
    std::uint64_t free_chunks = 0;
    std::list<Item*> lru;  // front = most recent
  };
  struct PerApp {
    std::uint64_t hits = 0, misses = 0;
    std::uint64_t live_bytes = 0;
    std::uint64_t occupied_chunk_bytes = 0;
    std::uint64_t allocated_slab_bytes = 0;  // partitioned cap accounting
    std::uint64_t cap = 0;
  };

  AppId scope_for(AppId app) const { return mode_ == SlabMode::Partitioned ? app : 0; }
  PerApp& require_app(AppId app);
  void evict_from(ScopeClass& sc);
  void erase_item(Item* item);

  SlabMode mode_;
  std::uint32_t slab_size_;
  std::uint64_t total_memory_;
  std::uint64_t allocated_total_ = 0;
  Timestamp now_ = 0;

  std::unordered_map<ItemKey, Item, ItemKeyHash> items_;
  std::map<ScopeKey, ScopeClass> scopes_;
  std::map<AppId, PerApp> apps_;
  std::map<std::uint32_t, std::uint64_t> allocated_by_class_;
};

}  // namespace memshare
