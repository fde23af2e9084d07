#include "qgars/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qgars {

void WeightProfile::validate() const {
  if (!(gamma > 1.0)) throw std::invalid_argument("weight profile: gamma must be > 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("weight profile: epsilon must lie in (0, 1)");
  }
}

double TaskWeights::weight(TaskId task) const {
  auto it = std::lower_bound(tasks.begin(), tasks.end(), task);
  if (it == tasks.end() || *it != task) {
    throw ContractViolation("no weight for task " + std::to_string(task));
  }
  return std::exp(log_weights[it - tasks.begin()]);
}

TaskWeights rank_weights(std::span<const TaskId> ranked, std::span<const TaskId> ready,
                         const WeightProfile& profile) {
  profile.validate();
  TaskWeights out;
  out.tasks.assign(ready.begin(), ready.end());
  std::sort(out.tasks.begin(), out.tasks.end());
  if (std::adjacent_find(out.tasks.begin(), out.tasks.end()) != out.tasks.end()) {
    throw ContractViolation("rank_weights: duplicate task in ready set");
  }
  out.log_weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(out.tasks.size()),
                                              std::log(profile.epsilon));
  const double log_gamma = std::log(profile.gamma);
  const auto k = static_cast<double>(ranked.size());
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    auto it = std::lower_bound(out.tasks.begin(), out.tasks.end(), ranked[r]);
    if (it == out.tasks.end() || *it != ranked[r]) {
      throw ContractViolation("rank_weights: ranked task " + std::to_string(ranked[r]) +
                              " is not in the ready set");
    }
    out.log_weights[it - out.tasks.begin()] = (k - static_cast<double>(r + 1)) * log_gamma;
  }
  return out;
}

RateAllocation num_allocate(std::span<const TaskId> tasks, const Eigen::VectorXd& weights,
                            NodeId node) {
  if (tasks.empty()) throw std::invalid_argument("num_allocate: empty weight map");
  if (static_cast<Eigen::Index>(tasks.size()) != weights.size()) {
    throw std::invalid_argument("num_allocate: task and weight counts differ");
  }
  if (!(weights.array() > 0.0).all() || !weights.allFinite()) {
    throw std::invalid_argument("num_allocate: weights must be positive and finite");
  }
  std::vector<Eigen::Index> idx(tasks.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return tasks[a] < tasks[b]; });

  RateAllocation alloc;
  alloc.node = node;
  alloc.tasks.resize(tasks.size());
  alloc.shares.resize(weights.size());
  const double total = weights.sum();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    alloc.tasks[i] = tasks[idx[i]];
    alloc.shares[i] = weights[idx[i]] / total;
  }
  return alloc;
}

RateAllocation num_allocate(const TaskWeights& weights, NodeId node) {
  if (weights.tasks.empty()) throw std::invalid_argument("num_allocate: empty weight map");
  // Softmax of the log weights; identical ratios to w / sum w.
  const double top = weights.log_weights.maxCoeff();
  const Eigen::VectorXd scaled = (weights.log_weights.array() - top).exp();
  RateAllocation alloc;
  alloc.node = node;
  alloc.tasks = weights.tasks;
  alloc.shares = scaled / scaled.sum();
  return alloc;
}

bool verify_kkt(const Eigen::VectorXd& weights, const RateAllocation& alloc) {
  if (weights.size() != alloc.shares.size() || weights.size() == 0) return false;
  if (std::abs(alloc.shares.sum() - 1.0) > 1e-9) return false;
  if (!(alloc.shares.array() > 0.0).all()) return false;
  const Eigen::ArrayXd ratio = weights.array() / alloc.shares.array();
  const double lo = ratio.minCoeff(), hi = ratio.maxCoeff();
  return (hi - lo) <= 1e-9 * std::max(1.0, std::abs(hi));
}

double log_utility(const Eigen::VectorXd& weights, const Eigen::VectorXd& shares) {
  return (weights.array() * shares.array().log()).sum();
}

}  // namespace qgars
