#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace memshare {

using AppId = std::uint32_t;
using SegmentId = std::uint32_t;
// Microseconds. Trace time in simulator mode, coarse wall-clock in server mode.
using Timestamp = std::uint64_t;

inline constexpr Timestamp kMicrosPerSecond = 1'000'000;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownAppError : std::runtime_error {
  explicit UnknownAppError(AppId app)
      : std::runtime_error("unknown app " + std::to_string(app)), app_id(app) {}
  AppId app_id;
};

struct OversizeObjectError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfMemoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotEnoughSegmentsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientHistoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TraceError : std::runtime_error {
  TraceError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  std::size_t line_number;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a. Used for the hash index buckets and the 8-byte shadow-queue key
// hashes; std::hash is not stable across implementations, this is.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t hash_key(std::string_view key) {
  return fnv1a64(key.data(), key.size());
}

inline std::uint64_t hash_app_key(AppId app, std::string_view key) {
  std::uint64_t h = fnv1a64(&app, sizeof(app));
  return fnv1a64(key.data(), key.size(), h);
}

// splitmix64, for deriving independent sub-seeds from one configured seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t s = base ^ (tag * 0x9e3779b97f4a7c15ull);
  return splitmix64(s);
}

}  // namespace memshare
