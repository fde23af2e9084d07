#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qgars {

using TaskId = std::uint32_t;
using NodeId = std::uint32_t;
using WorkflowId = std::uint32_t;
using Epoch = std::int64_t;

/// Raised for malformed scenarios and experiment configurations.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller breaks an operation's precondition, e.g. a policy
/// hands back an allocation outside the simplex.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ComputeNode {
  NodeId id = 0;
  Eigen::VectorXd capacity;  // d resource magnitudes per epoch, all > 0
};

struct TaskSpec {
  TaskId id = 0;
  WorkflowId workflow = 0;
  NodeId assigned_node = 0;
  double nominal_demand = 1.0;  // work units
  std::vector<TaskId> predecessors;
};

struct WorkflowDag {
  WorkflowId id = 0;
  double sla_weight = 1.0;
  Epoch release_epoch = 0;
  std::vector<TaskSpec> tasks;
  std::vector<std::pair<TaskId, TaskId>> edges;  // (predecessor, successor)
};

enum class TaskStatus { pending, ready, running, done };

const char* to_string(TaskStatus s);

struct TaskState {
  TaskId spec = 0;
  double backlog = 0.0;       // q_v, work units
  double arrival_rate = 0.0;  // a_v, work units per epoch
  double remaining_work = 0.0;
  double predicted_remaining = 0.0;
  TaskStatus status = TaskStatus::pending;
  Epoch ready_epoch = -1;  // epoch at which the task entered the ready set
};

/// Per-node scalar shares theta_v, stored against an ascending task list.
struct RateAllocation {
  NodeId node = 0;
  std::vector<TaskId> tasks;
  Eigen::VectorXd shares;

  bool contains(TaskId task) const;
  /// Throws ContractViolation when the task is not covered.
  double share(TaskId task) const;
  double total() const { return shares.sum(); }
  std::size_t size() const { return tasks.size(); }
};

/// Throws ContractViolation unless every share is positive and the shares
/// sum to at most 1 + 1e-9.
void check_feasible(const RateAllocation& alloc);

struct Scenario {
  std::vector<ComputeNode> nodes;
  std::vector<WorkflowDag> workflows;

  std::size_t task_count() const;
  const ComputeNode& node(NodeId id) const;
  bool has_node(NodeId id) const;
};

/// Dense table indexed by TaskId; task ids in a scenario are 0..n-1.
using StateTable = std::vector<TaskState>;

/// Checks every structural invariant of a scenario (dense task ids, known
/// nodes, positive capacities and demands, acyclic DAGs). Throws ConfigError.
void validate(const Scenario& scenario);

/// Kahn order of one workflow's tasks; throws ConfigError on a cycle.
std::vector<TaskId> topological_order(const WorkflowDag& dag);

/// Fresh pending states, one per task, with remaining work at the nominal
/// demand.
StateTable initial_states(const Scenario& scenario);

/// Tasks assigned to `node` that are not done and whose predecessors are all
/// done; pending ones are promoted to ready. Workflows whose release epoch is
/// after `now` are invisible.
std::vector<TaskId> ready_set(const Scenario& scenario, StateTable& states,
                              NodeId node,
                              Epoch now = std::numeric_limits<Epoch>::max());

/// Rate vectors theta_v * C_m, one column per task of `alloc`, in the
/// allocation's task order.
Eigen::MatrixXd expand_rates(const RateAllocation& alloc,
                             const ComputeNode& node);

}  // namespace qgars
