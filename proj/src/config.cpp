#include "memshare/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace memshare {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": '" + value + "'");
  }
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + key + ": '" + value + "'");
  }
}

}  // namespace

std::string to_string(EngineKind k) {
  switch (k) {
    case EngineKind::Memshare: return "memshare";
    case EngineKind::SlabPartitioned: return "slab_partitioned";
    case EngineKind::SlabGreedy: return "slab_greedy";
  }
  return "?";
}

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Partitioned: return "partitioned";
    case PolicyKind::Shared: return "shared";
    case PolicyKind::IdleTax: return "idle_tax";
  }
  return "?";
}

EngineKind engine_kind_from_string(const std::string& s) {
  if (s == "memshare") return EngineKind::Memshare;
  if (s == "slab_partitioned") return EngineKind::SlabPartitioned;
  if (s == "slab_greedy") return EngineKind::SlabGreedy;
  throw ConfigError("unknown engine '" + s + "'");
}

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "partitioned") return PolicyKind::Partitioned;
  if (s == "shared") return PolicyKind::Shared;
  if (s == "idle_tax") return PolicyKind::IdleTax;
  throw ConfigError("unknown policy '" + s + "'");
}

RankPolicy rank_policy_from_string(const std::string& s) {
  if (s == "lru") return RankPolicy::lru();
  if (s == "lfu") return RankPolicy::lfu();
  if (s.rfind("slru:", 0) == 0) {
    std::uint64_t thr = parse_u64("rank_policy", s.substr(5));
    return RankPolicy::slru(static_cast<std::uint32_t>(thr));
  }
  throw ConfigError("unknown rank_policy '" + s + "' (expect lru|lfu|slru:<threshold>)");
}

void EngineConfig::validate() const {
  if (segment_size_bytes < 64) throw ConfigError("segment_size_bytes too small");
  if (total_memory_bytes / segment_size_bytes < 2)
    throw ConfigError("total_memory_bytes must hold at least 2 segments");
  if (free_pool_target_fraction < 0 || free_pool_target_fraction >= 1)
    throw ConfigError("free_pool_target_fraction must be in [0, 1)");
  if (tax_rate < 0 || tax_rate > 1) throw ConfigError("tax_rate must be in [0, 1]");
  if (need_fraction < 0 || need_fraction > 1)
    throw ConfigError("need_fraction must be in [0, 1]");
  if (tail_drop_threshold < 0 || tail_drop_threshold > 1)
    throw ConfigError("tail_drop_threshold must be in [0, 1]");
  if (segments_per_pass < 1) throw ConfigError("segments_per_pass must be >= 1");
  std::uint64_t reserved = 0;
  for (const auto& app : apps) reserved += app.private_mem_bytes;
  if (reserved > total_memory_bytes)
    throw ConfigError("sum of private_mem_bytes exceeds total_memory_bytes");
}

EngineConfig parse_config(const std::string& text) {
  EngineConfig cfg;
  std::map<AppId, AppConfig> apps;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));

    if (key.rfind("app.", 0) == 0) {
      std::size_t dot = key.find('.', 4);
      if (dot == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected app.<id>.<key>");
      AppId id = static_cast<AppId>(parse_u64(key, key.substr(4, dot - 4)));
      std::string sub = key.substr(dot + 1);
      AppConfig& app = apps.try_emplace(id).first->second;
      app.id = id;
      if (sub == "private_mem_bytes") app.private_mem_bytes = parse_u64(key, value);
      else if (sub == "credit_size_bytes") app.credit_size_bytes = parse_u64(key, value);
      else if (sub == "rank_policy") app.rank_policy = rank_policy_from_string(value);
      else if (sub == "shadow_queue_bytes") app.shadow_queue_bytes = parse_u64(key, value);
      else throw ConfigError("unknown app key '" + sub + "'");
      continue;
    }

    if (key == "engine") cfg.engine = engine_kind_from_string(value);
    else if (key == "total_memory_bytes") cfg.total_memory_bytes = parse_u64(key, value);
    else if (key == "segment_size_bytes")
      cfg.segment_size_bytes = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "free_pool_target_fraction")
      cfg.free_pool_target_fraction = parse_f64(key, value);
    else if (key == "policy") cfg.policy = policy_kind_from_string(value);
    else if (key == "tax_rate") cfg.tax_rate = parse_f64(key, value);
    else if (key == "idle_time") cfg.idle_time = parse_u64(key, value);
    else if (key == "rng_seed") cfg.rng_seed = parse_u64(key, value);
    else if (key == "segments_per_pass")
      cfg.segments_per_pass = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "need_fraction") cfg.need_fraction = parse_f64(key, value);
    else if (key == "tail_drop_threshold") cfg.tail_drop_threshold = parse_f64(key, value);
    else if (key == "max_parallel_passes")
      cfg.max_parallel_passes = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "tick_interval") cfg.tick_interval = parse_u64(key, value);
    else if (key == "metrics_window") cfg.metrics_window = parse_u64(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  for (auto& [id, app] : apps) cfg.apps.push_back(app);
  std::sort(cfg.apps.begin(), cfg.apps.end(),
            [](const AppConfig& a, const AppConfig& b) { return a.id < b.id; });
  cfg.validate();
  return cfg;
}

EngineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace memshare
