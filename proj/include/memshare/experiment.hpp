#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memshare/config.hpp"
#include "memshare/engine.hpp"
#include "memshare/trace.hpp"

namespace memshare {

struct ExperimentOptions {
  // A lookaside cache's SETs come from miss handling; when on, every GET miss
  // is followed by a SET of the record's size.
  bool fill_on_miss = true;
  Timestamp metrics_window = kMicrosPerSecond;
  std::optional<std::uint64_t> seed_override;
};

struct SeriesPoint {
  Timestamp window_end = 0;
  AppId app = 0;
  std::uint64_t gets = 0, hits = 0;       // deltas within the window
  std::uint64_t shadow_hits = 0;          // delta within the window
  std::uint64_t occupancy = 0;            // actual_mem at the window boundary
  std::uint64_t target_mem = 0;
};

struct CleanerPoint {
  Timestamp window_end = 0;
  std::uint64_t relocated_bytes = 0;  // delta within the window
  std::uint64_t freed_segments = 0;
  double bandwidth_bps = 0.0;
};

struct ExperimentResult {
  std::vector<AppId> apps;
  std::vector<SeriesPoint> series;
  std::vector<CleanerPoint> cleaner_series;
  StatsSnapshot final_stats;
  std::uint64_t trace_events = 0;
  std::uint64_t total_relocated_bytes = 0;
  std::uint64_t total_freed_segments = 0;
  std::uint64_t total_passes = 0;
};

ExperimentResult run_experiment(const EngineConfig& config,
                                const std::vector<TraceRecord>& trace,
                                const ExperimentOptions& options);

// summary.csv, series.csv, cleaner.csv under out_dir (created if missing).
void write_result_csvs(const ExperimentResult& result, const std::string& out_dir);

struct SummaryRow {
  std::string app;  // app id or "combined"
  std::uint64_t gets = 0, hits = 0, misses = 0;
  double hit_rate = 0.0;
  std::uint64_t shadow_hits = 0;
  std::uint64_t actual_mem = 0, target_mem = 0;
};

std::vector<SummaryRow> summary_rows(const ExperimentResult& result);
std::vector<SummaryRow> read_summary_csv(const std::string& path);

struct ComparisonRow {
  std::string app;
  double baseline_miss_rate = 0.0;
  double candidate_miss_rate = 0.0;
  double baseline_hit_rate = 0.0;
  double candidate_hit_rate = 0.0;
  double miss_reduction = 0.0;  // 1 - candidate/baseline miss rate
};

std::vector<ComparisonRow> compare_summaries(const std::vector<SummaryRow>& baseline,
                                             const std::vector<SummaryRow>& candidate);
void write_comparison_csv(const std::vector<ComparisonRow>& rows, const std::string& path);

// Deterministic value payload for SETs synthesized by the harness.
std::string make_value(std::string_view key, std::uint32_t size);

}  // namespace memshare
