#include "qgars/domain.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace qgars {

const char* to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::pending: return "pending";
    case TaskStatus::ready: return "ready";
    case TaskStatus::running: return "running";
    case TaskStatus::done: return "done";
  }
  return "?";
}

bool RateAllocation::contains(TaskId task) const {
  return std::binary_search(tasks.begin(), tasks.end(), task);
}

double RateAllocation::share(TaskId task) const {
  auto it = std::lower_bound(tasks.begin(), tasks.end(), task);
  if (it == tasks.end() || *it != task) {
    throw ContractViolation("allocation on node " + std::to_string(node) +
                            " does not cover task " + std::to_string(task));
  }
  return shares[it - tasks.begin()];
}

void check_feasible(const RateAllocation& alloc) {
  if (static_cast<Eigen::Index>(alloc.tasks.size()) != alloc.shares.size()) {
    throw ContractViolation("allocation task list and share vector differ in length");
  }
  if (!std::is_sorted(alloc.tasks.begin(), alloc.tasks.end())) {
    throw ContractViolation("allocation task list must be ascending");
  }
  for (Eigen::Index i = 0; i < alloc.shares.size(); ++i) {
    if (!(alloc.shares[i] > 0.0)) {
      std::ostringstream os;
      os << "non-positive share " << alloc.shares[i] << " for task "
         << alloc.tasks[i] << " on node " << alloc.node;
      throw ContractViolation(os.str());
    }
  }
  if (alloc.total() > 1.0 + 1e-9) {
    std::ostringstream os;
    os << "shares on node " << alloc.node << " sum to " << alloc.total();
    throw ContractViolation(os.str());
  }
}

std::size_t Scenario::task_count() const {
  std::size_t n = 0;
  for (const auto& w : workflows) n += w.tasks.size();
  return n;
}

bool Scenario::has_node(NodeId id) const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [id](const ComputeNode& n) { return n.id == id; });
}

const ComputeNode& Scenario::node(NodeId id) const {
  if (id < nodes.size() && nodes[id].id == id) return nodes[id];
  for (const auto& n : nodes) {
    if (n.id == id) return n;
  }
  throw ConfigError("unknown node id " + std::to_string(id));
}

std::vector<TaskId> topological_order(const WorkflowDag& dag) {
  std::vector<TaskId> ids;
  ids.reserve(dag.tasks.size());
  for (const auto& t : dag.tasks) ids.push_back(t.id);
  std::sort(ids.begin(), ids.end());
  auto pos = [&](TaskId id) -> std::size_t {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) {
      throw ConfigError("workflow " + std::to_string(dag.id) +
                        " references unknown task " + std::to_string(id));
    }
    return static_cast<std::size_t>(it - ids.begin());
  };

  std::vector<int> indegree(ids.size(), 0);
  std::vector<std::vector<std::size_t>> succ(ids.size());
  for (const auto& [from, to] : dag.edges) {
    succ[pos(from)].push_back(pos(to));
    ++indegree[pos(to)];
  }
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (indegree[i] == 0) frontier.push_back(i);
  }
  std::vector<TaskId> order;
  order.reserve(ids.size());
  while (!frontier.empty()) {
    auto i = frontier.front();
    frontier.pop_front();
    order.push_back(ids[i]);
    for (auto j : succ[i]) {
      if (--indegree[j] == 0) frontier.push_back(j);
    }
  }
  if (order.size() != ids.size()) {
    throw ConfigError("workflow " + std::to_string(dag.id) + " contains a cycle");
  }
  return order;
}

void validate(const Scenario& scenario) {
  if (!scenario.nodes.empty()) {
    const auto d = scenario.nodes.front().capacity.size();
    if (d < 1) throw ConfigError("capacity vectors need at least one dimension");
    for (std::size_t i = 0; i < scenario.nodes.size(); ++i) {
      const auto& n = scenario.nodes[i];
      if (n.id != i) throw ConfigError("node ids must be dense and ordered");
      if (n.capacity.size() != d) {
        throw ConfigError("node " + std::to_string(n.id) +
                          " has a capacity dimension different from node 0");
      }
      if ((n.capacity.array() <= 0.0).any()) {
        throw ConfigError("node " + std::to_string(n.id) +
                          " has a non-positive capacity component");
      }
    }
  }

  std::vector<char> seen(scenario.task_count(), 0);
  for (const auto& w : scenario.workflows) {
    if (!(w.sla_weight > 0.0)) {
      throw ConfigError("workflow " + std::to_string(w.id) + " needs sla_weight > 0");
    }
    for (const auto& t : w.tasks) {
      if (t.id >= seen.size() || seen[t.id]) {
        throw ConfigError("task ids must be dense and unique (task " +
                          std::to_string(t.id) + ")");
      }
      seen[t.id] = 1;
      if (t.workflow != w.id) {
        throw ConfigError("task " + std::to_string(t.id) + " names the wrong workflow");
      }
      if (!(t.nominal_demand > 0.0)) {
        throw ConfigError("task " + std::to_string(t.id) + " needs nominal_demand > 0");
      }
      if (!scenario.has_node(t.assigned_node)) {
        throw ConfigError("task " + std::to_string(t.id) + " assigned to unknown node " +
                          std::to_string(t.assigned_node));
      }
    }
    // Edges and predecessor lists must describe the same relation.
    std::vector<std::pair<TaskId, TaskId>> from_preds;
    for (const auto& t : w.tasks) {
      for (auto p : t.predecessors) from_preds.emplace_back(p, t.id);
    }
    auto edges = w.edges;
    std::sort(edges.begin(), edges.end());
    std::sort(from_preds.begin(), from_preds.end());
    if (edges != from_preds) {
      throw ConfigError("workflow " + std::to_string(w.id) +
                        " edge list disagrees with task predecessor sets");
    }
    topological_order(w);
  }
}

StateTable initial_states(const Scenario& scenario) {
  StateTable states(scenario.task_count());
  for (const auto& w : scenario.workflows) {
    for (const auto& t : w.tasks) {
      auto& s = states.at(t.id);
      s.spec = t.id;
      s.remaining_work = t.nominal_demand;
      s.backlog = t.nominal_demand;
      s.predicted_remaining = t.nominal_demand;
    }
  }
  return states;
}

std::vector<TaskId> ready_set(const Scenario& scenario, StateTable& states,
                              NodeId node, Epoch now) {
  if (!scenario.has_node(node)) {
    throw ConfigError("ready_set: unknown node id " + std::to_string(node));
  }
  if (states.size() < scenario.task_count()) {
    throw ContractViolation("ready_set: state table does not cover every task");
  }
  std::vector<TaskId> out;
  for (const auto& w : scenario.workflows) {
    if (w.release_epoch > now) continue;
    for (const auto& t : w.tasks) {
      if (t.assigned_node != node) continue;
      auto& s = states[t.id];
      if (s.status == TaskStatus::done) continue;
      const bool unblocked = std::all_of(
          t.predecessors.begin(), t.predecessors.end(),
          [&](TaskId p) { return states[p].status == TaskStatus::done; });
      if (!unblocked) continue;
      if (s.status == TaskStatus::pending) {
        s.status = TaskStatus::ready;
        if (now != std::numeric_limits<Epoch>::max()) s.ready_epoch = now;
      }
      out.push_back(t.id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::MatrixXd expand_rates(const RateAllocation& alloc, const ComputeNode& node) {
  if (alloc.node != node.id) {
    throw ContractViolation("expand_rates: allocation is for node " +
                            std::to_string(alloc.node) + ", not " +
                            std::to_string(node.id));
  }
  return node.capacity * alloc.shares.transpose();
}

}  // namespace qgars
