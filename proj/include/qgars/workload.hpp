#pragma once

#include "qgars/domain.hpp"
#include "qgars/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace qgars {

/// Mean-preserving lognormal service demand with a Pareto tail mixture whose
/// probability grows with alpha.
struct LatencyModel {
  double alpha = 0.0;
  double tail_prob_coeff = 0.05;  // tail probability = min(coeff * alpha, cap)
  double tail_prob_cap = 0.3;
  double tail_shape = 2.0;        // Pareto shape, > 1

  double tail_probability() const;
  /// E[p] / p_nominal = 1 + P(tail) * (shape / (shape - 1) - 1).
  double mean_inflation() const;
  void validate() const;
};

/// p = nominal * exp(alpha Z - alpha^2 / 2), times a Pareto(shape) >= 1 draw
/// with probability tail_probability(). Always > 0.
double sample_service_demand(double nominal, const LatencyModel& model, Rng& rng);

struct WorkloadParams {
  std::size_t count = 1;
  std::pair<int, int> node_range{10, 50};   // tasks per workflow
  std::pair<int, int> width_range{2, 8};    // maximum layer width
  std::pair<double, double> sla_range{0.5, 2.0};
  std::pair<double, double> demand_range{1.0, 10.0};
  std::size_t compute_nodes = 1;            // tasks are assigned uniformly over these
  TaskId first_task = 0;
  WorkflowId first_workflow = 0;

  void validate() const;
};

/// Layered random DAGs: task count and max width drawn uniformly, layers of
/// width uniform in [1, max width], every task past the first layer wired to
/// 1-3 distinct tasks of the previous layer. SLA weights and nominal demands
/// are log-uniform; node assignment is uniform. Deterministic in `seed`.
std::vector<WorkflowDag> generate_workload(const WorkloadParams& params, std::uint64_t seed);

/// `count` nodes with capacity vectors of dimension `dims`, each component
/// uniform in [1, 4] (capacity only scales rate vectors).
std::vector<ComputeNode> make_nodes(std::size_t count, int dims, std::uint64_t seed);

/// Sum of nominal demands along the heaviest path of a workflow.
double critical_path_demand(const WorkflowDag& dag, const std::vector<double>& demand_by_task);

}  // namespace qgars
