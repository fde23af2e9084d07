#pragma once

#include "qgars/simulation.hpp"
#include "qgars/workload.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace qgars {

enum class Phase { prior_gain, volatility, shock };

const char* to_string(Phase p);
/// Accepts "prior_gain" / "volatility" / "shock" and "1" / "2" / "3".
Phase parse_phase(const std::string& name);

/// Everything that determines an experiment's output bytes, apart from the
/// worker count.
struct ExperimentConfig {
  Phase phase = Phase::prior_gain;
  std::size_t runs = 1000;
  std::vector<double> alpha_grid{0.0};
  std::vector<PolicyKind> policies;
  std::uint64_t master_seed = 20240601;
  std::string output_path = "out";
  /// 0 uses every hardware thread.
  std::size_t threads = 0;

  std::size_t nodes = 8;
  int capacity_dims = 2;
  WorkloadParams workload;
  /// Open-system load: when > 0, workflows are released by a Poisson process
  /// whose rate puts `load` nominal work units per node per epoch into the
  /// system (and workload.count is ignored). 0 releases every workflow at
  /// epoch 0.
  double load = 0.0;

  /// horizon, shock profile, latency model and scheduler knobs.
  SimConfig sim;

  void validate() const;
  /// Calibrated desk-scale defaults for a phase.
  static ExperimentConfig defaults(Phase phase);
};

/// Reads a JSON config; keys absent from the file keep the defaults of the
/// phase named in it. Unknown keys are rejected with ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);

/// Scenario JSON: {"nodes": [{"id", "capacity": [...]}], "workflows": [{"id",
/// "sla_weight", "release_epoch", "tasks": [{"id", "node", "demand",
/// "predecessors": [...]}]}]}. Edges are derived from predecessor lists.
Scenario load_scenario(const std::filesystem::path& path);
Scenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const Scenario& scenario);

/// Master-seed override read from QGARS_SEED; nullopt when unset or empty.
/// Throws ConfigError when set to something other than an unsigned integer.
std::optional<std::uint64_t> seed_from_environment();

/// The scenario of one Monte Carlo run; identical for every policy and alpha.
Scenario build_scenario(const ExperimentConfig& config, std::size_t run_id);
/// Environment seed of one run (demands, predictions, failures, arrivals).
std::uint64_t episode_seed(const ExperimentConfig& config, std::size_t run_id);

/// Runs fn(0..n-1) on `threads` workers. Every index is executed exactly once;
/// the exception of the lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct ImprovementStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double worse_than_1pct = 0.0;  // fraction of runs with improvement < -0.01
};

struct Phase1Row {
  std::size_t run_id = 0;
  double wct_qgars = 0.0;
  double wct_srpt = 0.0;
  double improvement = 0.0;  // (srpt - qgars) / srpt
};

struct Phase1Result {
  std::vector<Phase1Row> rows;
  ImprovementStats improvement;
  double mean_wct_qgars = 0.0;
  double mean_wct_srpt = 0.0;
};

struct Phase2Row {
  double alpha = 0.0;
  std::size_t run_id = 0;
  std::vector<double> wct;  // per policy, config order
  double final_lambda = 0.0;
};

struct CompletionRow {
  double alpha = 0.0;
  std::size_t run_id = 0;
  WorkflowId workflow = 0;
  PolicyKind policy = PolicyKind::qgars;
  double completion_time = 0.0;
  bool censored = false;
};

struct PolicyWctStats {
  PolicyKind policy = PolicyKind::qgars;
  double mean_wct = 0.0;
  double p50_wct = 0.0;
  double p95_wct = 0.0;
  double p99_completion = 0.0;  // over all workflows of all runs
};

struct AlphaSummary {
  double alpha = 0.0;
  std::vector<PolicyWctStats> policies;
  double mean_final_lambda = 0.0;
};

struct Phase2Result {
  std::vector<PolicyKind> policies;
  std::vector<Phase2Row> rows;
  std::vector<CompletionRow> completions;  // every workflow, every alpha
  std::vector<AlphaSummary> by_alpha;
};

/// Cross-run mean series of one policy, indexed by epoch.
struct PolicySeries {
  PolicyKind policy = PolicyKind::qgars;
  std::vector<double> lambda;
  std::vector<double> p95_backlog;
  std::vector<double> blocked;
  std::vector<double> utilization;
  double peak_p95 = 0.0;
  /// First epoch at or after the shock end with mean blocked ratio < 0.01;
  /// -1 if never (or no shock).
  Epoch blocked_recovery = -1;
  double mean_utilization = 0.0;  // over epochs and runs
  double mean_wct = 0.0;
};

struct Phase3Row {
  std::size_t run_id = 0;
  PolicyKind policy = PolicyKind::qgars;
  double wct = 0.0;
  double mean_utilization = 0.0;
  double peak_p95 = 0.0;
  std::size_t workflows = 0;
  std::size_t censored = 0;
};

struct Phase3Result {
  Epoch horizon = 0;
  std::optional<ShockProfile> shock;
  std::vector<PolicySeries> series;  // config policy order
  std::vector<Phase3Row> rows;
  /// Mean lambda of the qgars series over [0, start), [start, end) and
  /// [end, horizon); zeros when qgars did not run.
  double lambda_before = 0.0;
  double lambda_during = 0.0;
  double lambda_after = 0.0;

  const PolicySeries* find(PolicyKind p) const;
};

using AggregateResult = std::variant<Phase1Result, Phase2Result, Phase3Result>;

Phase1Result run_phase1(const ExperimentConfig& config);
Phase2Result run_phase2(const ExperimentConfig& config);
Phase3Result run_phase3(const ExperimentConfig& config);
AggregateResult run_experiment(const ExperimentConfig& config);

ImprovementStats improvement_stats(const std::vector<double>& improvements);

/// Writes the phase CSVs and summary.json into `dir` (created if needed).
/// Throws std::runtime_error naming the path on I/O failure. Returns the
/// files written.
std::vector<std::filesystem::path> emit(const AggregateResult& result,
                                        const ExperimentConfig& config,
                                        const std::filesystem::path& dir);

/// CSV text of the per-run table (header only when there are no rows).
std::string phase1_csv(const Phase1Result& r);
std::string phase2_csv(const Phase2Result& r);
std::string phase2_completion_csv(const Phase2Result& r);
std::string phase3_series_csv(const Phase3Result& r);
std::string phase3_runs_csv(const Phase3Result& r);
std::string summary_json(const AggregateResult& result, const ExperimentConfig& config);

/// Mean of `v` over [from, to), clipped to the vector.
double window_mean(const std::vector<double>& v, Epoch from, Epoch to);

}  // namespace qgars
