#include "qgars/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qgars {

double LatencyModel::tail_probability() const {
  return std::min(tail_prob_coeff * alpha, tail_prob_cap);
}

double LatencyModel::mean_inflation() const {
  return 1.0 + tail_probability() * (tail_shape / (tail_shape - 1.0) - 1.0);
}

void LatencyModel::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("latency model: alpha must be >= 0");
  if (!(tail_shape > 1.0)) throw ConfigError("latency model: tail_shape must be > 1");
  if (!(tail_prob_coeff >= 0.0) || !(tail_prob_cap >= 0.0 && tail_prob_cap <= 1.0)) {
    throw ConfigError("latency model: tail probabilities must lie in [0, 1]");
  }
}

double sample_service_demand(double nominal, const LatencyModel& model, Rng& rng) {
  if (!(nominal > 0.0)) throw std::invalid_argument("sample_service_demand: nominal must be > 0");
  if (model.alpha == 0.0) return nominal;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double a = model.alpha;
  double p = nominal * std::exp(a * normal(rng) - 0.5 * a * a);
  const double tail_draw = unit(rng);
  const double pareto_u = unit(rng);
  if (tail_draw < model.tail_probability()) {
    p *= std::pow(1.0 - pareto_u, -1.0 / model.tail_shape);
  }
  return std::max(p, std::numeric_limits<double>::min());
}

void WorkloadParams::validate() const {
  if (node_range.first < 1 || node_range.first > node_range.second) {
    throw ConfigError("workload: node_range must satisfy 1 <= lo <= hi");
  }
  if (width_range.first < 1 || width_range.first > width_range.second) {
    throw ConfigError("workload: width_range must satisfy 1 <= lo <= hi");
  }
  if (width_range.first > node_range.second) {
    throw ConfigError("workload: minimum width exceeds the maximum task count");
  }
  if (!(sla_range.first > 0.0) || sla_range.first > sla_range.second) {
    throw ConfigError("workload: sla_range must be positive and ordered");
  }
  if (!(demand_range.first > 0.0) || demand_range.first > demand_range.second) {
    throw ConfigError("workload: demand_range must be positive and ordered");
  }
  if (compute_nodes < 1) throw ConfigError("workload: need at least one compute node");
}

namespace {

double log_uniform(Rng& rng, std::pair<double, double> range) {
  if (range.first == range.second) return range.first;
  std::uniform_real_distribution<double> u(std::log(range.first), std::log(range.second));
  return std::exp(u(rng));
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

std::vector<WorkflowDag> generate_workload(const WorkloadParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(derive_seed(seed, {kWorkload}));
  std::vector<WorkflowDag> out;
  out.reserve(params.count);
  TaskId next_task = params.first_task;

  for (std::size_t w = 0; w < params.count; ++w) {
    WorkflowDag dag;
    dag.id = params.first_workflow + static_cast<WorkflowId>(w);
    int n = uniform_int(rng, params.node_range.first, params.node_range.second);
    const int max_width = std::max(
        params.width_range.first,
        std::min(uniform_int(rng, params.width_range.first, params.width_range.second), n));

    std::vector<std::vector<TaskId>> layers;
    while (n > 0) {
      const int width = uniform_int(rng, 1, std::min(max_width, n));
      layers.emplace_back();
      for (int i = 0; i < width; ++i) layers.back().push_back(next_task++);
      n -= width;
    }

    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (TaskId id : layers[l]) {
        TaskSpec t;
        t.id = id;
        t.workflow = dag.id;
        t.assigned_node = static_cast<NodeId>(
            uniform_int(rng, 0, static_cast<int>(params.compute_nodes) - 1));
        t.nominal_demand = log_uniform(rng, params.demand_range);
        if (l > 0) {
          auto prev = layers[l - 1];
          const int fan_in = uniform_int(rng, 1, std::min<int>(3, static_cast<int>(prev.size())));
          // Partial Fisher-Yates for distinct parents.
          for (int i = 0; i < fan_in; ++i) {
            const int j = uniform_int(rng, i, static_cast<int>(prev.size()) - 1);
            std::swap(prev[i], prev[j]);
            t.predecessors.push_back(prev[i]);
          }
          std::sort(t.predecessors.begin(), t.predecessors.end());
          for (TaskId p : t.predecessors) dag.edges.emplace_back(p, id);
        }
        dag.tasks.push_back(std::move(t));
      }
    }
    dag.sla_weight = log_uniform(rng, params.sla_range);
    out.push_back(std::move(dag));
  }
  return out;
}

std::vector<ComputeNode> make_nodes(std::size_t count, int dims, std::uint64_t seed) {
  if (dims < 1 || dims > 8) throw ConfigError("make_nodes: dimension must lie in [1, 8]");
  Rng rng(derive_seed(seed, {kWorkload, 0xC0DE}));
  std::uniform_real_distribution<double> u(1.0, 4.0);
  std::vector<ComputeNode> nodes(count);
  for (std::size_t m = 0; m < count; ++m) {
    nodes[m].id = static_cast<NodeId>(m);
    nodes[m].capacity.resize(dims);
    for (int d = 0; d < dims; ++d) nodes[m].capacity[d] = u(rng);
  }
  return nodes;
}

double critical_path_demand(const WorkflowDag& dag, const std::vector<double>& demand_by_task) {
  std::vector<double> finish(demand_by_task.size(), 0.0);
  double longest = 0.0;
  std::vector<const TaskSpec*> by_id(demand_by_task.size(), nullptr);
  for (const auto& t : dag.tasks) by_id[t.id] = &t;
  for (TaskId id : topological_order(dag)) {
    double start = 0.0;
    for (TaskId p : by_id[id]->predecessors) start = std::max(start, finish[p]);
    finish[id] = start + demand_by_task[id];
    longest = std::max(longest, finish[id]);
  }
  return longest;
}

}  // namespace qgars
