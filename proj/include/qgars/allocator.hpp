#pragma once

#include "qgars/domain.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace qgars {

struct WeightProfile {
  double gamma = 2.0;     // per-rank decay factor, > 1
  double epsilon = 0.01;  // base weight for ready tasks outside the window

  void validate() const;
};

/// Weights over a node's ready set, kept in log space so gamma^(K-1) never
/// overflows; tasks are ascending.
struct TaskWeights {
  std::vector<TaskId> tasks;
  Eigen::VectorXd log_weights;

  Eigen::VectorXd values() const { return log_weights.array().exp(); }
  double weight(TaskId task) const;
};

/// gamma^(K-r) for the task at rank r of `ranked` (K = ranked.size()),
/// epsilon for every other task of `ready`.
TaskWeights rank_weights(std::span<const TaskId> ranked, std::span<const TaskId> ready,
                         const WeightProfile& profile);

/// Closed-form proportional-fair shares theta_v = w_v / sum_u w_u.
/// Throws std::invalid_argument on an empty set or a non-positive weight.
RateAllocation num_allocate(std::span<const TaskId> tasks, const Eigen::VectorXd& weights,
                            NodeId node);
RateAllocation num_allocate(const TaskWeights& weights, NodeId node);

/// KKT check for max sum w log theta on the simplex: the capacity constraint
/// binds (sum theta = 1 within 1e-9) and w_v / theta_v is the same for every
/// task (1e-9 relative).
bool verify_kkt(const Eigen::VectorXd& weights, const RateAllocation& alloc);

/// sum_v w_v log theta_v.
double log_utility(const Eigen::VectorXd& weights, const Eigen::VectorXd& shares);

}  // namespace qgars
