#pragma once

// Seeded Monte Carlo campaigns: every run draws truth and measurements once
// and feeds the same measurement sequence to every configured filter.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajphd/filters.hpp"
#include "trajphd/metrics.hpp"
#include "trajphd/scenario.hpp"

namespace trajphd {

struct FilterSpec {
  FilterKind kind = FilterKind::Tphd;
  ReductionConfig reduction;  // reduction.lscan is ignored by the tagged filters

  /// "tphd_L2", "tagged-phd", ...; also the per-step CSV file stem.
  std::string label() const;
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  std::vector<FilterSpec> filters;
  int n_runs = 1;
  MetricConfig metric;
  std::filesystem::path output_dir = "results";
  int jobs = 1;
  int n_max = kDefaultMaxCardinality;
  /// Draw a new ground truth for every run (from the run's truth
  /// substream); otherwise one truth from run 0 is shared by all runs.
  bool truth_per_run = true;
  /// Also score every run with OSPA and per-step GOSPA.
  bool set_metrics = true;

  void validate() const;
};

/// Parses a JSON document with top-level keys scenario / filters / metric /
/// runs / output. Throws ConfigError on schema violations.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Default campaign: the four-target scenario with TPHD and TCPHD at
/// L = 1, 2, 5 and both tagged baselines.
ExperimentConfig default_experiment();

/// One filter's result on one run. Per-step vectors have n_steps entries;
/// entry k-1 scores the estimate at step k against the truth alive at k.
struct FilterRunRecord {
  std::vector<MetricBreakdown> trajectory;  // unnormalized p-th power costs
  std::vector<MetricBreakdown> gospa_sum;   // sum over s <= k of gospa^p
  std::vector<double> ospa_sum;             // sum over s <= k of ospa^p
  std::vector<int> n_hat;
  double seconds = 0.0;  // filtering only
};

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  std::vector<FilterRunRecord> filters;  // parallel to ExperimentConfig::filters
};

/// Aggregates of one filter over all runs.
struct FilterSummary {
  std::string label;
  FilterKind kind = FilterKind::Tphd;
  int lscan = 1;
  std::vector<double> d;  // d(k), trajectory metric
  std::vector<double> loc, missed, false_targets, switches;
  std::vector<double> gospa, ospa;
  std::vector<double> mean_n_hat;
  double d_total = 0.0;  // trajectory metric over all k
  double gospa_total = 0.0;
  double ospa_total = 0.0;
  double mean_seconds = 0.0;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::vector<FilterSummary> summaries;
  std::vector<std::string> written;  // files emitted, relative to output_dir
};

/// Runs the campaign without touching the file system.
ExperimentResult simulate_experiment(const ExperimentConfig& config);

/// Runs the campaign and writes per-filter CSVs, summary.csv, runs.csv,
/// cardinality.csv and run_metadata.json into config.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Mean N̂ against k per filter as CSV text: k, one column per filter.
std::string cardinality_trace_csv(const ExperimentResult& result);

/// Fixed-width Table-style rendering of the summaries.
std::string format_summary_table(const ExperimentResult& result);

}  // namespace trajphd
