#pragma once

#include "qgars/adaptive.hpp"
#include "qgars/domain.hpp"
#include "qgars/workload.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qgars {

enum class PolicyKind { qgars, static_prior, robust, srpt_pred };

const char* to_string(PolicyKind p);
/// Accepts the to_string spellings; throws ConfigError otherwise.
PolicyKind parse_policy(const std::string& name);

/// Interval [start, end) during which nodes fail independently each epoch and
/// prediction noise is scaled up.
struct ShockProfile {
  Epoch start = 300;
  Epoch end = 900;
  double node_fail_prob = 0.1;
  double prediction_noise_factor = 5.0;

  bool active(Epoch t) const { return t >= start && t < end; }
  void validate(Epoch horizon) const;
};

struct EpochMetrics {
  Epoch epoch = 0;
  double wct_partial = 0.0;  // sum of w_j C_j over workflows completed so far
  double p95_backlog = 0.0;  // nearest-rank, over ready and running tasks
  double blocked_capacity_ratio = 0.0;
  double utilization = 0.0;
  double lambda = 0.0;  // trust weight used for this epoch's decisions
  double loss_q = 0.0;  // normalized shadow losses (qgars only)
  double loss_b = 0.0;
  std::size_t active_tasks = 0;
  std::size_t failed_nodes = 0;
};

struct SchedulerConfig {
  QuantumExpertConfig prior;
  double initial_lambda = 0.5;
  /// <= 0 selects default_eta(eta_horizon), or default_eta(horizon) when
  /// eta_horizon is also <= 0.
  double eta = 0.0;
  double eta_horizon = 0.0;
  double lambda_floor = 1e-6;
  bool srpt_use_predictions = true;
};

/// What the telemetry backlog q_v of a ready task measures.
enum class BacklogModel {
  remaining,   // the task's own remaining work
  downstream,  // own remaining work plus the heaviest path of unstarted successors
};

struct SimConfig {
  Epoch horizon = 1000;
  BacklogModel backlog = BacklogModel::downstream;
  LatencyModel latency;
  /// Log-scale spread of the persistent per-task prediction bias.
  double prediction_sigma = 0.1;
  /// Predicted remaining work never drops below this fraction of the nominal
  /// demand, so an overrunning task still looks unfinished.
  double prediction_floor = 0.1;
  std::optional<ShockProfile> shock;
  /// Poisson work arrivals per active task per epoch, one work unit each.
  double arrival_rate = 0.0;
  /// Work units per epoch at theta = 1.
  double service_rate = 1.0;
  SchedulerConfig scheduler;

  void validate() const;
  /// Lightweight annealer settings for in-loop use: 4 slices, 24 sweeps,
  /// one read, no wall-clock cap.
  static AnnealConfig in_loop_anneal();
};

struct WorkflowOutcome {
  WorkflowId id = 0;
  double sla_weight = 1.0;
  Epoch release = 0;
  Epoch completion = -1;  // horizon when censored
  bool censored = false;
  double completion_time() const { return static_cast<double>(completion - release); }
};

struct EpisodeResult {
  PolicyKind policy = PolicyKind::qgars;
  std::vector<EpochMetrics> metrics;
  std::vector<WorkflowOutcome> workflows;  // released workflows, by release then id
  double wct = 0.0;                        // including censored charges
  bool all_done = true;
  Epoch epochs_run = 0;
  TrustState trust;
};

/// One episode: owns the mutable task states of a scenario and advances them
/// an epoch at a time. The scenario must outlive the simulation.
///
/// Environment randomness (realized demands, prediction bias, failures,
/// arrivals) is drawn from counter-based streams keyed by `seed`, so the same
/// seed gives every policy the same environment.
class Simulation {
 public:
  Simulation(const Scenario& scenario, const SimConfig& config, PolicyKind policy,
             std::uint64_t seed);

  /// Advances one epoch. Throws ContractViolation when a policy produces an
  /// infeasible allocation and std::logic_error when called after the
  /// horizon.
  EpochMetrics step();

  /// All workflows finished and none left to release.
  bool finished() const;
  Epoch now() const { return now_; }
  const StateTable& states() const { return states_; }
  const TrustState& trust() const { return trust_; }
  double wct_partial() const { return wct_; }
  /// Realized service demand drawn for a task at construction.
  double realized_demand(TaskId task) const { return realized_[task]; }

  /// Closes the episode: unfinished released workflows are charged
  /// C_j = horizon - release and flagged.
  EpisodeResult finish(std::vector<EpochMetrics> metrics) const;

 private:
  struct NodeDecision {
    std::optional<RateAllocation> alloc;
    double raw_q = 0.0;
    double raw_b = 0.0;
  };

  void release_due();
  void make_ready(TaskId id, Epoch epoch);
  double predicted_remaining(TaskId id, Epoch t) const;
  NodeDecision decide(NodeId node, Epoch t, std::vector<TaskState>& scratch);
  void complete(TaskId id, Epoch t);

  const Scenario& scenario_;
  SimConfig config_;
  PolicyKind policy_;
  std::uint64_t seed_;
  Epoch now_ = 0;

  StateTable states_;
  std::vector<const TaskSpec*> spec_;
  std::vector<double> realized_;
  std::vector<double> expected_;  // nominal demand plus observed arrivals
  std::vector<double> served_;
  std::vector<double> bias_;      // standard normal prediction bias per task
  std::vector<double> tail_;      // heaviest successor path, nominal demands
  std::vector<double> tail_pred_nominal_;  // same with biased demands, nominal sigma
  std::vector<double> tail_pred_shock_;    // same with biased demands, shock sigma
  std::vector<int> open_preds_;
  std::vector<std::vector<TaskId>> successors_;
  std::vector<std::size_t> workflow_of_;  // task -> index into scenario workflows
  std::vector<std::size_t> open_tasks_;   // per workflow index
  std::vector<bool> released_;
  std::vector<Epoch> completion_;
  std::vector<std::size_t> release_order_;
  std::size_t next_release_ = 0;
  std::size_t unfinished_ = 0;
  std::vector<std::vector<TaskId>> ready_;  // per node, ascending
  TrustState trust_;
  double wct_ = 0.0;
};

/// Runs until every workflow completes or the horizon is reached.
EpisodeResult run_episode(const Scenario& scenario, const SimConfig& config, PolicyKind policy,
                          std::uint64_t seed);

/// Nearest-rank percentile (p in (0, 100]) of an unsorted sample; 0 when empty.
double nearest_rank(std::vector<double> values, double p);

}  // namespace qgars
