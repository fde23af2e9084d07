#pragma once

#include "qgars/qubo.hpp"

#include <chrono>
#include <cstdint>
#include <stdexcept>

namespace qgars {

/// Raised by solve_exhaustive when K exceeds its enumeration guard.
class ExhaustiveGuardError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct AnnealConfig {
  int trotter_slices = 8;
  int sweeps = 200;
  double gamma_initial = 3.0;
  double gamma_final = 0.1;
  /// Effective temperature; <= 0 selects 0.5 * mean |linear coefficient|.
  double temperature = 0.0;
  int reads = 4;
  /// Wall-clock cap checked between sweeps. max() disables the check, which
  /// keeps results independent of machine speed.
  std::chrono::microseconds time_budget{1000};
  std::uint64_t seed = 0x5eed;

  static AnnealConfig unlimited() {
    AnnealConfig c;
    c.time_budget = std::chrono::microseconds::max();
    return c;
  }
  void validate() const;
};

struct SolveResult {
  RankAssignment assignment;
  double energy = 0.0;      // H at the one-hot encoding of `assignment`
  double raw_energy = 0.0;  // best binary-vector H seen during the search
  int sweeps_used = 0;  // summed over all reads
  std::chrono::microseconds elapsed{0};
  bool feasible_at_readout = false;  // best raw vector was already a permutation
  double initial_energy = 0.0;       // repair energy of the first initialization
};

/// Effective temperature used when AnnealConfig::temperature <= 0.
double auto_temperature(const QuboInstance& qubo);

/// Path-integral simulated quantum annealing: P coupled Trotter replicas of
/// the Ising form of `qubo`, single-spin Metropolis sweeps against
/// H/P - J_perp sum_k s^k s^{k+1}, with J_perp = -(T/2) ln tanh(g) where
/// g runs linearly from gamma_initial to gamma_final. The transverse field is
/// therefore Gamma = g P T, i.e. the schedule is in units of the slice
/// temperature. Every slice is repaired and scored after
/// each sweep; the best permutation across slices, sweeps and reads wins.
SolveResult solve_sqa(const QuboInstance& qubo, const AnnealConfig& config);

/// Single-replica simulated annealing with geometric cooling from 2T to
/// T/100, same readout and determinism contract as solve_sqa.
SolveResult solve_sa(const QuboInstance& qubo, const AnnealConfig& config);

/// Enumerates all K! permutations (K <= 8). Ties resolve to the
/// lexicographically smallest order.
SolveResult solve_exhaustive(const QuboInstance& qubo);

constexpr int kExhaustiveMaxK = 8;

}  // namespace qgars
