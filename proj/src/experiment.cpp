#include "memshare/experiment.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace memshare {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct AppWindowState {
  std::uint64_t gets = 0, hits = 0, shadow_hits = 0;
};

}  // namespace

std::string make_value(std::string_view key, std::uint32_t size) {
  char fill = static_cast<char>('a' + hash_key(key) % 26);
  return std::string(size, fill);
}

ExperimentResult run_experiment(const EngineConfig& config,
                                const std::vector<TraceRecord>& trace,
                                const ExperimentOptions& options) {
  EngineConfig cfg = config;
  if (options.seed_override) cfg.rng_seed = *options.seed_override;
  cfg.metrics_window = options.metrics_window;
  auto engine = make_cache(cfg);
  auto* memshare_engine = dynamic_cast<MemshareEngine*>(engine.get());

  ExperimentResult result;
  for (const auto& app : cfg.apps) result.apps.push_back(app.id);

  const Timestamp window = options.metrics_window;
  Timestamp next_window = window;
  std::map<AppId, AppWindowState> prev;
  for (AppId id : result.apps) prev[id] = {};
  std::uint64_t prev_relocated = 0, prev_freed = 0;

  auto flush_window = [&](Timestamp boundary) {
    StatsSnapshot snap = engine->stats();
    for (const AppStats& s : snap.per_app) {
      AppWindowState& p = prev[s.id];
      SeriesPoint pt;
      pt.window_end = boundary;
      pt.app = s.id;
      pt.gets = s.gets - p.gets;
      pt.hits = s.hits - p.hits;
      pt.shadow_hits = s.shadow_hits - p.shadow_hits;
      pt.occupancy = s.actual_mem;
      pt.target_mem = s.target_mem;
      result.series.push_back(pt);
      p.gets = s.gets;
      p.hits = s.hits;
      p.shadow_hits = s.shadow_hits;
    }
    CleanerPoint cp;
    cp.window_end = boundary;
    if (memshare_engine) {
      std::uint64_t rel = memshare_engine->cleaner().total_relocated_bytes();
      std::uint64_t freed = memshare_engine->cleaner().total_freed_segments();
      cp.relocated_bytes = rel - prev_relocated;
      cp.freed_segments = freed - prev_freed;
      cp.bandwidth_bps = 2.0 * static_cast<double>(cp.relocated_bytes) /
                         (static_cast<double>(window) / kMicrosPerSecond);
      prev_relocated = rel;
      prev_freed = freed;
    }
    result.cleaner_series.push_back(cp);
  };

  for (const TraceRecord& rec : trace) {
    while (rec.ts >= next_window) {
      flush_window(next_window);
      next_window += window;
    }
    engine->tick(rec.ts);
    switch (rec.op) {
      case TraceOp::Get: {
        GetResult r = engine->get(rec.app, rec.key);
        if (!r.hit && options.fill_on_miss)
          engine->set(rec.app, rec.key, make_value(rec.key, rec.size));
        break;
      }
      case TraceOp::Set:
        engine->set(rec.app, rec.key, make_value(rec.key, rec.size));
        break;
      case TraceOp::Del:
        engine->del(rec.app, rec.key);
        break;
    }
    result.trace_events += 1;
  }
  flush_window(next_window);

  result.final_stats = engine->stats();
  if (memshare_engine) {
    result.total_relocated_bytes = memshare_engine->cleaner().total_relocated_bytes();
    result.total_freed_segments = memshare_engine->cleaner().total_freed_segments();
    result.total_passes = memshare_engine->cleaner().total_passes();
  }
  return result;
}

std::vector<SummaryRow> summary_rows(const ExperimentResult& result) {
  std::vector<SummaryRow> rows;
  for (const AppStats& s : result.final_stats.per_app) {
    SummaryRow r;
    r.app = std::to_string(s.id);
    r.gets = s.gets;
    r.hits = s.hits;
    r.misses = s.misses;
    r.hit_rate = s.hit_rate;
    r.shadow_hits = s.shadow_hits;
    r.actual_mem = s.actual_mem;
    r.target_mem = s.target_mem;
    rows.push_back(r);
  }
  SummaryRow combined;
  combined.app = "combined";
  combined.gets = result.final_stats.total_gets;
  combined.hits = result.final_stats.total_hits;
  combined.misses = combined.gets - combined.hits;
  combined.hit_rate = result.final_stats.combined_hit_rate;
  for (const AppStats& s : result.final_stats.per_app) {
    combined.shadow_hits += s.shadow_hits;
    combined.actual_mem += s.actual_mem;
    combined.target_mem += s.target_mem;
  }
  rows.push_back(combined);
  return rows;
}

void write_result_csvs(const ExperimentResult& result, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  {
    std::ofstream out(out_dir + "/summary.csv", std::ios::binary);
    if (!out) throw IoError("cannot write summary.csv");
    out << "app,gets,hits,misses,hit_rate,shadow_hits,actual_mem,target_mem\n";
    for (const SummaryRow& r : summary_rows(result)) {
      out << r.app << ',' << r.gets << ',' << r.hits << ',' << r.misses << ','
          << fmt_double(r.hit_rate) << ',' << r.shadow_hits << ',' << r.actual_mem << ','
          << r.target_mem << "\n";
    }
  }
  {
    std::ofstream out(out_dir + "/series.csv", std::ios::binary);
    if (!out) throw IoError("cannot write series.csv");
    out << "window_end_us,app,gets,hits,hit_rate,shadow_hits,occupancy_bytes,target_mem_bytes\n";
    for (const SeriesPoint& p : result.series) {
      double rate = p.gets ? static_cast<double>(p.hits) / static_cast<double>(p.gets) : 0.0;
      out << p.window_end << ',' << p.app << ',' << p.gets << ',' << p.hits << ','
          << fmt_double(rate) << ',' << p.shadow_hits << ',' << p.occupancy << ','
          << p.target_mem << "\n";
    }
  }
  {
    std::ofstream out(out_dir + "/cleaner.csv", std::ios::binary);
    if (!out) throw IoError("cannot write cleaner.csv");
    out << "window_end_us,relocated_bytes,freed_segments,bandwidth_bytes_per_sec\n";
    for (const CleanerPoint& p : result.cleaner_series) {
      out << p.window_end << ',' << p.relocated_bytes << ',' << p.freed_segments << ','
          << fmt_double(p.bandwidth_bps) << "\n";
    }
  }
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open summary csv: " + path);
  std::vector<SummaryRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    SummaryRow r;
    std::getline(ss, r.app, ',');
    std::getline(ss, field, ',');
    r.gets = std::stoull(field);
    std::getline(ss, field, ',');
    r.hits = std::stoull(field);
    std::getline(ss, field, ',');
    r.misses = std::stoull(field);
    std::getline(ss, field, ',');
    r.hit_rate = std::stod(field);
    std::getline(ss, field, ',');
    r.shadow_hits = std::stoull(field);
    std::getline(ss, field, ',');
    r.actual_mem = std::stoull(field);
    std::getline(ss, field, ',');
    r.target_mem = std::stoull(field);
    rows.push_back(r);
  }
  return rows;
}

std::vector<ComparisonRow> compare_summaries(const std::vector<SummaryRow>& baseline,
                                             const std::vector<SummaryRow>& candidate) {
  std::vector<ComparisonRow> rows;
  for (const SummaryRow& c : candidate) {
    const SummaryRow* b = nullptr;
    for (const SummaryRow& r : baseline)
      if (r.app == c.app) b = &r;
    if (!b) continue;
    ComparisonRow row;
    row.app = c.app;
    row.baseline_hit_rate = b->hit_rate;
    row.candidate_hit_rate = c.hit_rate;
    row.baseline_miss_rate = b->gets ? static_cast<double>(b->misses) / b->gets : 0.0;
    row.candidate_miss_rate = c.gets ? static_cast<double>(c.misses) / c.gets : 0.0;
    row.miss_reduction = row.baseline_miss_rate > 0
                             ? 1.0 - row.candidate_miss_rate / row.baseline_miss_rate
                             : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write comparison csv: " + path);
  out << "app,baseline_hit_rate,candidate_hit_rate,baseline_miss_rate,candidate_miss_rate,"
         "miss_reduction\n";
  for (const ComparisonRow& r : rows) {
    out << r.app << ',' << fmt_double(r.baseline_hit_rate) << ','
        << fmt_double(r.candidate_hit_rate) << ',' << fmt_double(r.baseline_miss_rate) << ','
        << fmt_double(r.candidate_miss_rate) << ',' << fmt_double(r.miss_reduction) << "\n";
  }
}

}  // namespace memshare
