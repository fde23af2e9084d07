#include "qgars/simulation.hpp"

#include "qgars/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qgars {

const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::qgars: return "qgars";
    case PolicyKind::static_prior: return "static_prior";
    case PolicyKind::robust: return "robust";
    case PolicyKind::srpt_pred: return "srpt_pred";
  }
  return "?";
}

PolicyKind parse_policy(const std::string& name) {
  for (auto p : {PolicyKind::qgars, PolicyKind::static_prior, PolicyKind::robust,
                 PolicyKind::srpt_pred}) {
    if (name == to_string(p)) return p;
  }
  throw ConfigError("unknown policy '" + name + "'");
}

void ShockProfile::validate(Epoch horizon) const {
  if (start < 0 || start >= end || end > horizon) {
    throw ConfigError("shock: need 0 <= start < end <= horizon");
  }
  if (!(node_fail_prob >= 0.0 && node_fail_prob <= 1.0)) {
    throw ConfigError("shock: node_fail_prob must lie in [0, 1]");
  }
  if (!(prediction_noise_factor >= 0.0)) {
    throw ConfigError("shock: prediction_noise_factor must be >= 0");
  }
}

void SimConfig::validate() const {
  if (horizon < 1) throw ConfigError("simulation: horizon must be >= 1");
  latency.validate();
  if (!(prediction_sigma >= 0.0)) throw ConfigError("simulation: prediction_sigma must be >= 0");
  if (!(prediction_floor > 0.0)) throw ConfigError("simulation: prediction_floor must be > 0");
  if (!(arrival_rate >= 0.0)) throw ConfigError("simulation: arrival_rate must be >= 0");
  if (!(service_rate > 0.0)) throw ConfigError("simulation: service_rate must be > 0");
  if (shock) shock->validate(horizon);
  if (!(scheduler.initial_lambda >= 0.0 && scheduler.initial_lambda <= 1.0)) {
    throw ConfigError("simulation: initial_lambda must lie in [0, 1]");
  }
  if (!(scheduler.lambda_floor >= 0.0 && scheduler.lambda_floor < 0.5)) {
    throw ConfigError("simulation: lambda_floor must lie in [0, 0.5)");
  }
  if (scheduler.prior.k_max < 1) throw ConfigError("simulation: k_max must be >= 1");
  if (!(scheduler.prior.beta > 0.0)) throw ConfigError("simulation: beta must be > 0");
  scheduler.prior.weights.validate();
  scheduler.prior.anneal.validate();
}

AnnealConfig SimConfig::in_loop_anneal() {
  AnnealConfig c = AnnealConfig::unlimited();
  c.trotter_slices = 4;
  c.sweeps = 24;
  c.reads = 1;
  return c;
}

double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("nearest_rank: p outside (0, 100]");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

namespace {

double standard_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t id) {
  // Box-Muller on two counter-based uniforms.
  const double u1 = 1.0 - hashed_uniform(seed, {stream, id, 0});
  const double u2 = hashed_uniform(seed, {stream, id, 1});
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int poisson_from_uniform(double u, double mean) {
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 1000) {
    ++k;
    p *= mean / k;
    cdf += p;
  }
  return k;
}

constexpr double kDoneTolerance = 1e-9;

}  // namespace

Simulation::Simulation(const Scenario& scenario, const SimConfig& config, PolicyKind policy,
                       std::uint64_t seed)
    : scenario_(scenario), config_(config), policy_(policy), seed_(seed) {
  validate(scenario);
  config_.validate();

  const auto n = scenario.task_count();
  states_ = initial_states(scenario);
  spec_.assign(n, nullptr);
  realized_.assign(n, 0.0);
  expected_.assign(n, 0.0);
  served_.assign(n, 0.0);
  bias_.assign(n, 0.0);
  open_preds_.assign(n, 0);
  successors_.assign(n, {});
  workflow_of_.assign(n, 0);
  ready_.assign(scenario.nodes.size(), {});

  const auto& wfs = scenario.workflows;
  open_tasks_.assign(wfs.size(), 0);
  released_.assign(wfs.size(), false);
  completion_.assign(wfs.size(), -1);
  for (std::size_t w = 0; w < wfs.size(); ++w) {
    open_tasks_[w] = wfs[w].tasks.size();
    for (const auto& t : wfs[w].tasks) {
      spec_[t.id] = &t;
      workflow_of_[t.id] = w;
      open_preds_[t.id] = static_cast<int>(t.predecessors.size());
      for (TaskId p : t.predecessors) successors_[p].push_back(t.id);

      Rng demand_rng(derive_seed(seed, {kDemand, t.id}));
      realized_[t.id] = sample_service_demand(t.nominal_demand, config_.latency, demand_rng);
      expected_[t.id] = t.nominal_demand;
      bias_[t.id] = standard_normal(seed, kPrediction, t.id);
      states_[t.id].remaining_work = realized_[t.id];
      states_[t.id].backlog = realized_[t.id];
    }
  }
  for (auto& s : successors_) std::sort(s.begin(), s.end());

  tail_.assign(n, 0.0);
  tail_pred_nominal_.assign(n, 0.0);
  tail_pred_shock_.assign(n, 0.0);
  const double sigma = config_.prediction_sigma;
  const double sigma_shock = config_.shock ? sigma * config_.shock->prediction_noise_factor : sigma;
  for (const auto& wf : wfs) {
    const auto order = topological_order(wf);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      for (TaskId s : successors_[*it]) {
        const double nominal = spec_[s]->nominal_demand;
        tail_[*it] = std::max(tail_[*it], nominal + tail_[s]);
        tail_pred_nominal_[*it] = std::max(tail_pred_nominal_[*it],
                                           nominal * std::exp(sigma * bias_[s]) +
                                               tail_pred_nominal_[s]);
        tail_pred_shock_[*it] = std::max(tail_pred_shock_[*it],
                                         nominal * std::exp(sigma_shock * bias_[s]) +
                                             tail_pred_shock_[s]);
      }
    }
  }

  release_order_.resize(wfs.size());
  for (std::size_t w = 0; w < wfs.size(); ++w) release_order_[w] = w;
  std::stable_sort(release_order_.begin(), release_order_.end(), [&](std::size_t a, std::size_t b) {
    if (wfs[a].release_epoch != wfs[b].release_epoch) {
      return wfs[a].release_epoch < wfs[b].release_epoch;
    }
    return wfs[a].id < wfs[b].id;
  });
  unfinished_ = wfs.size();

  const auto& sched = config_.scheduler;
  trust_.lambda = sched.initial_lambda;
  trust_.lambda_floor = sched.lambda_floor;
  if (sched.eta > 0.0) {
    trust_.eta = sched.eta;
  } else {
    const double h = sched.eta_horizon > 0.0 ? sched.eta_horizon
                                             : static_cast<double>(config_.horizon);
    trust_.eta = default_eta(h);
  }
}

bool Simulation::finished() const {
  return next_release_ == release_order_.size() && unfinished_ == 0;
}

void Simulation::make_ready(TaskId id, Epoch epoch) {
  auto& s = states_[id];
  s.status = TaskStatus::ready;
  s.ready_epoch = epoch;
  auto& list = ready_[spec_[id]->assigned_node];
  list.insert(std::upper_bound(list.begin(), list.end(), id), id);
}

void Simulation::release_due() {
  const auto& wfs = scenario_.workflows;
  while (next_release_ < release_order_.size() &&
         wfs[release_order_[next_release_]].release_epoch <= now_) {
    const auto w = release_order_[next_release_++];
    released_[w] = true;
    if (open_tasks_[w] == 0) {
      completion_[w] = now_;
      --unfinished_;
      continue;
    }
    for (const auto& t : wfs[w].tasks) {
      if (open_preds_[t.id] == 0) make_ready(t.id, now_);
    }
  }
}

double Simulation::predicted_remaining(TaskId id, Epoch t) const {
  double sigma = config_.prediction_sigma;
  if (config_.shock && config_.shock->active(t)) sigma *= config_.shock->prediction_noise_factor;
  const double nominal = spec_[id]->nominal_demand;
  const double base =
      std::max(expected_[id] - served_[id], config_.prediction_floor * nominal);
  return base * std::exp(sigma * bias_[id]);
}

Simulation::NodeDecision Simulation::decide(NodeId node, Epoch t,
                                            std::vector<TaskState>& scratch) {
  NodeDecision out;
  const auto& list = ready_[node];
  if (list.empty()) return out;

  const bool downstream = config_.backlog == BacklogModel::downstream;
  const bool shock = config_.shock && config_.shock->active(t);
  const bool prior_view = policy_ == PolicyKind::qgars || policy_ == PolicyKind::static_prior;
  scratch.clear();
  for (TaskId id : list) {
    auto& s = states_[id];
    s.backlog = s.remaining_work + (downstream ? tail_[id] : 0.0);
    s.predicted_remaining = predicted_remaining(id, t);
    scratch.push_back(s);
    // The prior ranks on the predicted work of the whole downstream path.
    if (prior_view && downstream) {
      scratch.back().predicted_remaining += shock ? tail_pred_shock_[id] : tail_pred_nominal_[id];
    }
  }

  QuantumExpertConfig prior = config_.scheduler.prior;
  prior.anneal.seed = derive_seed(seed_, {kAnneal, static_cast<std::uint64_t>(t), node});

  switch (policy_) {
    case PolicyKind::qgars: {
      auto dq = expert_quantum(scratch, node, prior);
      auto db = expert_robust(scratch, node);
      out.raw_q = delay_pressure(scratch, dq->alloc);
      out.raw_b = delay_pressure(scratch, db->alloc);
      out.alloc = mix_rates(trust_.lambda, dq->alloc, db->alloc);
      break;
    }
    case PolicyKind::static_prior:
      out.alloc = policy_static_prior(scratch, node, prior);
      break;
    case PolicyKind::robust:
      out.alloc = expert_robust(scratch, node)->alloc;
      break;
    case PolicyKind::srpt_pred:
      out.alloc = policy_srpt(scratch, node, prior.k_max, prior.weights,
                              config_.scheduler.srpt_use_predictions);
      break;
  }
  check_feasible(*out.alloc);
  if (out.alloc->tasks != list) {
    throw ContractViolation("policy " + std::string(to_string(policy_)) + " at epoch " +
                            std::to_string(t) + " node " + std::to_string(node) +
                            " did not cover exactly the ready set");
  }
  return out;
}

void Simulation::complete(TaskId id, Epoch t) {
  auto& s = states_[id];
  s.status = TaskStatus::done;
  s.remaining_work = 0.0;
  s.backlog = 0.0;
  for (TaskId succ : successors_[id]) {
    if (--open_preds_[succ] == 0) make_ready(succ, t + 1);
  }
  const auto w = workflow_of_[id];
  if (--open_tasks_[w] == 0) {
    const auto& wf = scenario_.workflows[w];
    completion_[w] = t + 1;
    wct_ += wf.sla_weight * static_cast<double>(t + 1 - wf.release_epoch);
    --unfinished_;
  }
}

EpochMetrics Simulation::step() {
  if (now_ >= config_.horizon) throw std::logic_error("Simulation::step past the horizon");
  const Epoch t = now_;
  release_due();

  const auto node_count = scenario_.nodes.size();
  const bool shock = config_.shock && config_.shock->active(t);

  EpochMetrics m;
  m.epoch = t;
  m.lambda = policy_ == PolicyKind::qgars          ? trust_.lambda
             : policy_ == PolicyKind::static_prior ? 1.0
                                                   : 0.0;

  std::vector<TaskState> scratch;
  std::vector<NodeDecision> decisions(node_count);
  double raw_q = 0.0;
  double raw_b = 0.0;
  for (std::size_t node = 0; node < node_count; ++node) {
    decisions[node] = decide(static_cast<NodeId>(node), t, scratch);
    raw_q += decisions[node].raw_q;
    raw_b += decisions[node].raw_b;
  }
  if (policy_ == PolicyKind::qgars) {
    const auto losses = shadow_losses(raw_q, raw_b, trust_);
    m.loss_q = losses.quantum;
    m.loss_b = losses.robust;
    trust_ = hedge_update(trust_, losses.quantum, losses.robust);
  }

  std::vector<TaskId> finished_tasks;
  double used_share = 0.0;
  double blocked_share = 0.0;
  for (std::size_t node = 0; node < node_count; ++node) {
    const auto& d = decisions[node];
    if (!d.alloc) continue;
    const auto& alloc = *d.alloc;
    const bool failed = shock && hashed_uniform(seed_, {kFailure, static_cast<std::uint64_t>(t),
                                                        node}) < config_.shock->node_fail_prob;
    if (failed) {
      ++m.failed_nodes;
      blocked_share += alloc.total();
      continue;
    }
    used_share += alloc.total();

    // Water-filling: capacity left by a task that finishes mid-epoch flows to
    // the node's other tasks in proportion to their shares.
    std::vector<std::pair<TaskId, double>> open;
    for (std::size_t i = 0; i < alloc.size(); ++i) {
      open.emplace_back(alloc.tasks[i], alloc.shares[static_cast<Eigen::Index>(i)]);
      states_[alloc.tasks[i]].status = TaskStatus::running;
    }
    double budget = config_.service_rate * alloc.total();
    while (!open.empty() && budget > 0.0) {
      double total = 0.0;
      for (const auto& [id, share] : open) total += share;
      bool any_done = false;
      for (const auto& [id, share] : open) {
        if (budget * share / total >= states_[id].remaining_work - kDoneTolerance) any_done = true;
      }
      if (!any_done) {
        for (const auto& [id, share] : open) {
          const double give = budget * share / total;
          states_[id].remaining_work -= give;
          served_[id] += give;
        }
        budget = 0.0;
        break;
      }
      std::vector<std::pair<TaskId, double>> keep;
      const double round_budget = budget;
      for (const auto& entry : open) {
        const TaskId id = entry.first;
        const double give = round_budget * entry.second / total;
        if (give >= states_[id].remaining_work - kDoneTolerance) {
          budget -= states_[id].remaining_work;
          served_[id] += states_[id].remaining_work;
          states_[id].remaining_work = 0.0;
          finished_tasks.push_back(id);
        } else {
          keep.push_back(entry);
        }
      }
      open.swap(keep);
    }
    if (!open.empty() && budget > 0.0) blocked_share += budget / config_.service_rate;
  }

  if (config_.arrival_rate > 0.0) {
    for (const auto& list : ready_) {
      for (TaskId id : list) {
        auto& s = states_[id];
        s.arrival_rate = config_.arrival_rate;
        if (s.remaining_work <= 0.0) continue;
        const double u = hashed_uniform(seed_, {kArrival, id, static_cast<std::uint64_t>(t)});
        const int k = poisson_from_uniform(u, config_.arrival_rate);
        s.remaining_work += k;
        expected_[id] += k;
      }
    }
  }

  std::sort(finished_tasks.begin(), finished_tasks.end());
  for (TaskId id : finished_tasks) {
    auto& list = ready_[spec_[id]->assigned_node];
    list.erase(std::lower_bound(list.begin(), list.end(), id));
  }
  for (TaskId id : finished_tasks) complete(id, t);

  std::vector<double> backlogs;
  const bool downstream = config_.backlog == BacklogModel::downstream;
  for (const auto& list : ready_) {
    for (TaskId id : list) {
      states_[id].backlog = states_[id].remaining_work + (downstream ? tail_[id] : 0.0);
      backlogs.push_back(states_[id].backlog);
    }
  }
  m.active_tasks = backlogs.size();
  m.p95_backlog = nearest_rank(std::move(backlogs), 95.0);
  const double nodes = static_cast<double>(std::max<std::size_t>(node_count, 1));
  m.utilization = std::clamp(used_share / nodes, 0.0, 1.0);
  m.blocked_capacity_ratio = std::clamp(blocked_share / nodes, 0.0, 1.0);
  m.wct_partial = wct_;
  ++now_;
  return m;
}

EpisodeResult Simulation::finish(std::vector<EpochMetrics> metrics) const {
  EpisodeResult r;
  r.policy = policy_;
  r.metrics = std::move(metrics);
  r.epochs_run = now_;
  r.trust = trust_;
  r.wct = wct_;
  r.all_done = unfinished_ == 0 && next_release_ == release_order_.size();
  const auto& wfs = scenario_.workflows;
  for (std::size_t i = 0; i < next_release_; ++i) {
    const auto w = release_order_[i];
    WorkflowOutcome o;
    o.id = wfs[w].id;
    o.sla_weight = wfs[w].sla_weight;
    o.release = wfs[w].release_epoch;
    if (completion_[w] >= 0) {
      o.completion = completion_[w];
    } else {
      o.completion = config_.horizon;
      o.censored = true;
      r.wct += o.sla_weight * o.completion_time();
    }
    r.workflows.push_back(o);
  }
  return r;
}

EpisodeResult run_episode(const Scenario& scenario, const SimConfig& config, PolicyKind policy,
                          std::uint64_t seed) {
  Simulation sim(scenario, config, policy, seed);
  std::vector<EpochMetrics> metrics;
  while (!sim.finished() && sim.now() < config.horizon) metrics.push_back(sim.step());
  return sim.finish(std::move(metrics));
}

}  // namespace qgars
