#include "qgars/adaptive.hpp"

#include "qgars/qubo.hpp"
#include "qgars/window.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace qgars {

const char* to_string(Expert e) {
  return e == Expert::quantum_guided ? "quantum_guided" : "robust_baseline";
}

double delay_pressure(std::span<const TaskState> ready, const RateAllocation& alloc) {
  double total = 0.0;
  for (const auto& s : ready) {
    const double theta = alloc.share(s.spec);
    if (!(theta > 0.0)) {
      throw ContractViolation("delay_pressure: task " + std::to_string(s.spec) +
                              " has a non-positive share");
    }
    total += s.backlog / theta;
  }
  return total;
}

ShadowLosses shadow_losses(double raw_q, double raw_b, TrustState& trust) {
  if (raw_q == 0.0 && raw_b == 0.0) return {};
  trust.running_max = std::max({trust.running_max, raw_q, raw_b});
  return {raw_q / trust.running_max, raw_b / trust.running_max};
}

ShadowLosses shadow_losses(std::span<const TaskState> ready, const ExpertDecision& decision_q,
                           const ExpertDecision& decision_b, TrustState& trust) {
  check_feasible(decision_q.alloc);
  check_feasible(decision_b.alloc);
  return shadow_losses(delay_pressure(ready, decision_q.alloc),
                       delay_pressure(ready, decision_b.alloc), trust);
}

TrustState hedge_update(const TrustState& trust, double loss_q, double loss_b) {
  TrustState next = trust;
  next.cum_loss_q += loss_q;
  next.cum_loss_b += loss_b;
  next.cum_loss_mixed += trust.lambda * loss_q + (1.0 - trust.lambda) * loss_b;
  const double lam = trust.lambda;
  if (lam <= 0.0 || lam >= 1.0) return next;  // absorbing endpoints
  // Shift both exponents by the smaller loss; the ratio is unchanged.
  const double base = std::min(loss_q, loss_b);
  const double wq = lam * std::exp(-trust.eta * (loss_q - base));
  const double wb = (1.0 - lam) * std::exp(-trust.eta * (loss_b - base));
  next.lambda = wq / (wq + wb);
  next.lambda = std::clamp(next.lambda, trust.lambda_floor, 1.0 - trust.lambda_floor);
  return next;
}

RateAllocation mix_rates(double lambda, const RateAllocation& q, const RateAllocation& b) {
  if (q.tasks != b.tasks) throw ContractViolation("mix_rates: experts cover different task sets");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ContractViolation("mix_rates: lambda outside [0, 1]");
  }
  RateAllocation out;
  out.node = q.node;
  out.tasks = q.tasks;
  out.shares = lambda * q.shares + (1.0 - lambda) * b.shares;
  return out;
}

double default_eta(double horizon) {
  if (!(horizon >= 1.0)) throw std::invalid_argument("default_eta: horizon must be >= 1");
  return std::sqrt(8.0 * std::numbers::ln2 / horizon);
}

double hedge_regret_bound(double eta, double horizon) {
  return std::numbers::ln2 / eta + eta * horizon / 8.0;
}

std::optional<ExpertDecision> expert_quantum(std::span<const TaskState> ready, NodeId node,
                                             const QuantumExpertConfig& config) {
  if (ready.empty()) return std::nullopt;
  const auto window = select_active_window(ready, config.k_max);

  std::vector<TaskId> ranked;
  if (window.size() == 1) {
    ranked = window;
  } else {
    std::vector<WindowEntry> entries;
    entries.reserve(window.size());
    for (TaskId id : window) {
      const auto it = std::find_if(ready.begin(), ready.end(),
                                   [id](const TaskState& s) { return s.spec == id; });
      const double q =
          config.input == PriorInput::predicted ? it->predicted_remaining : it->backlog;
      entries.push_back({id, std::max(q, 0.0)});
    }
    const auto qubo = QuboInstance::build(entries, config.beta);
    const auto solved = solve_sqa(qubo, config.anneal);
    for (int v : solved.assignment.order) ranked.push_back(qubo.tasks()[v]);
  }

  std::vector<TaskId> ids;
  ids.reserve(ready.size());
  for (const auto& s : ready) ids.push_back(s.spec);
  return ExpertDecision{Expert::quantum_guided,
                        num_allocate(rank_weights(ranked, ids, config.weights), node)};
}

std::optional<ExpertDecision> expert_robust(std::span<const TaskState> ready, NodeId node) {
  if (ready.empty()) return std::nullopt;
  std::vector<TaskId> ids;
  Eigen::VectorXd w(static_cast<Eigen::Index>(ready.size()));
  for (std::size_t i = 0; i < ready.size(); ++i) {
    ids.push_back(ready[i].spec);
    w[static_cast<Eigen::Index>(i)] = std::max(ready[i].backlog, 0.0) + kRobustFloor;
  }
  return ExpertDecision{Expert::robust_baseline, num_allocate(ids, w, node)};
}

std::optional<RateAllocation> policy_static_prior(std::span<const TaskState> ready, NodeId node,
                                                  const QuantumExpertConfig& config) {
  auto d = expert_quantum(ready, node, config);
  if (!d) return std::nullopt;
  return std::move(d->alloc);
}

std::vector<TaskId> srpt_order(std::span<const TaskState> ready, bool use_predictions) {
  std::vector<std::size_t> idx(ready.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto key = [&](std::size_t i) {
    return use_predictions ? ready[i].predicted_remaining : ready[i].remaining_work;
  };
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (key(a) != key(b)) return key(a) < key(b);
    return ready[a].spec < ready[b].spec;
  });
  std::vector<TaskId> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ready[i].spec);
  return out;
}

std::optional<RateAllocation> policy_srpt(std::span<const TaskState> ready, NodeId node,
                                          int k_max, const WeightProfile& profile,
                                          bool use_predictions) {
  if (ready.empty()) return std::nullopt;
  if (k_max < 1) throw std::invalid_argument("policy_srpt: k_max must be >= 1");
  const auto order = srpt_order(ready, use_predictions);
  const auto k = std::min(order.size(), static_cast<std::size_t>(k_max));
  std::vector<TaskId> ids;
  ids.reserve(ready.size());
  for (const auto& s : ready) ids.push_back(s.spec);
  return num_allocate(rank_weights(std::span(order).first(k), ids, profile), node);
}

}  // namespace qgars
