#pragma once

#include "qgars/allocator.hpp"
#include "qgars/annealer.hpp"
#include "qgars/domain.hpp"

#include <optional>
#include <span>

namespace qgars {

/// Hedge state for mixing the quantum-guided expert with the robust baseline.
struct TrustState {
  double lambda = 0.5;
  double eta = 0.1;
  double running_max = 0.0;  // largest raw per-epoch delay pressure so far
  double cum_loss_q = 0.0;
  double cum_loss_b = 0.0;
  /// Cumulative lambda-weighted loss lambda*Lq + (1-lambda)*Lb, the quantity
  /// the Hedge bound controls.
  double cum_loss_mixed = 0.0;
  /// lambda is clamped to [floor, 1 - floor] after each update. With floor 0
  /// the endpoints are absorbing fixed points.
  double lambda_floor = 1e-6;
};

enum class Expert { quantum_guided, robust_baseline };

const char* to_string(Expert e);

struct ExpertDecision {
  Expert label = Expert::quantum_guided;
  RateAllocation alloc;
};

struct ShadowLosses {
  double quantum = 0.0;
  double robust = 0.0;
};

/// sum_v q_v / theta_v over `ready`. Throws ContractViolation when a ready
/// task has no share.
double delay_pressure(std::span<const TaskState> ready, const RateAllocation& alloc);

/// Normalizes raw per-epoch pressures by the running maximum, raising it
/// first. An epoch where both raw values are zero returns (0, 0) and leaves
/// the state alone.
ShadowLosses shadow_losses(double raw_q, double raw_b, TrustState& trust);
ShadowLosses shadow_losses(std::span<const TaskState> ready, const ExpertDecision& decision_q,
                           const ExpertDecision& decision_b, TrustState& trust);

/// Exponential-weights update of lambda; cumulative losses are advanced.
TrustState hedge_update(const TrustState& trust, double loss_q, double loss_b);

/// lambda * theta_q + (1 - lambda) * theta_b. Throws ContractViolation when
/// the two allocations cover different tasks.
RateAllocation mix_rates(double lambda, const RateAllocation& q, const RateAllocation& b);
inline RateAllocation mix_rates(const TrustState& trust, const ExpertDecision& q,
                                const ExpertDecision& b) {
  return mix_rates(trust.lambda, q.alloc, b.alloc);
}

/// sqrt(8 ln 2 / T), the minimizer of ln2/eta + eta T/8.
double default_eta(double horizon);

/// Regret allowance ln2/eta + eta*T/8.
double hedge_regret_bound(double eta, double horizon);

/// Which backlog the quantum-guided prior ranks on: the prediction-based
/// estimate (the scheduler cannot observe true remaining work) or the
/// telemetry backlog itself.
enum class PriorInput { predicted, observed };

struct QuantumExpertConfig {
  int k_max = 8;
  double beta = 1.0;
  WeightProfile weights;
  AnnealConfig anneal;
  PriorInput input = PriorInput::predicted;
};

/// Window selection, QUBO build, SQA solve, rank weights and closed-form NUM.
/// Returns nullopt for an empty ready set (idle epoch).
std::optional<ExpertDecision> expert_quantum(std::span<const TaskState> ready, NodeId node,
                                             const QuantumExpertConfig& config);

/// Backlog-proportional shares theta_v = (q_v + eps_q) / sum_u (q_u + eps_q).
std::optional<ExpertDecision> expert_robust(std::span<const TaskState> ready, NodeId node);

constexpr double kRobustFloor = 1e-6;

/// Static prior: the quantum-guided expert with lambda frozen at 1.
std::optional<RateAllocation> policy_static_prior(std::span<const TaskState> ready, NodeId node,
                                                  const QuantumExpertConfig& config);

/// Ranks ascending by predicted remaining work (true remaining when
/// use_predictions is false), ties to the lower id; top k_max get
/// gamma^(K-r), the rest epsilon.
std::optional<RateAllocation> policy_srpt(std::span<const TaskState> ready, NodeId node,
                                          int k_max, const WeightProfile& profile,
                                          bool use_predictions);

/// Ready tasks sorted ascending by (predicted or true) remaining work.
std::vector<TaskId> srpt_order(std::span<const TaskState> ready, bool use_predictions);

}  // namespace qgars
