#include "qgars/annealer.hpp"

#include "qgars/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace qgars {

void AnnealConfig::validate() const {
  if (trotter_slices < 1) throw std::invalid_argument("anneal: trotter_slices must be >= 1");
  if (sweeps < 1) throw std::invalid_argument("anneal: sweeps must be >= 1");
  if (reads < 1) throw std::invalid_argument("anneal: reads must be >= 1");
  if (!(gamma_final > 0.0) || !(gamma_initial > gamma_final)) {
    throw std::invalid_argument("anneal: need gamma_initial > gamma_final > 0");
  }
  if (time_budget.count() <= 0) throw std::invalid_argument("anneal: time_budget must be positive");
}

double auto_temperature(const QuboInstance& qubo) {
  const double t = 0.5 * qubo.linear().cwiseAbs().mean();
  return t > 0.0 ? t : 1.0;
}

namespace {

using Clock = std::chrono::steady_clock;

// Ising couplings J_ij = b_ij / 4 of a rank-assignment QUBO (s = 2x - 1). Small instances
// get a dense matrix; large ones are evaluated from the structure.
class Couplings {
 public:
  explicit Couplings(const QuboInstance& qubo) : qubo_(qubo), k_(qubo.k()), n_(qubo.size()) {
    if (n_ <= kDenseLimit) {
      dense_ = qubo.dense_quadratic();
      dense_ = (dense_ + dense_.transpose().eval()) * 0.25;
    } else {
      kernel_rows_.resize(static_cast<std::size_t>(k_) * k_);
      for (int r = 0; r < k_; ++r) {
        for (int s = 0; s < k_; ++s) {
          kernel_rows_[static_cast<std::size_t>(r) * k_ + s] = s == r ? 0.0 : qubo.decay(std::abs(r - s));
        }
      }
    }
  }

  Eigen::Index size() const { return n_; }

  // f += scale * J_{i,*}
  void add_row(Eigen::Index i, double scale, double* f) const {
    if (dense_.size()) {
      const double* col = dense_.col(i).data();  // symmetric
      for (Eigen::Index j = 0; j < n_; ++j) f[j] += scale * col[j];
      return;
    }
    const int v = static_cast<int>(i / k_), r = static_cast<int>(i % k_);
    const double pen = 0.5 * qubo_.penalty_a() * scale;
    const auto& q = qubo_.interference_matrix();
    const double* g = kernel_rows_.data() + static_cast<std::size_t>(r) * k_;
    for (int u = 0; u < k_; ++u) {
      double* fu = f + static_cast<Eigen::Index>(u) * k_;
      if (u == v) {
        for (int s = 0; s < k_; ++s) {
          if (s != r) fu[s] += pen;
        }
        continue;
      }
      fu[r] += pen;
      const double c = 0.25 * q(v, u) * scale;
      if (c == 0.0) continue;
      for (int s = 0; s < k_; ++s) {
        if (s != r) fu[s] += c * g[s];
      }
    }
  }

 private:
  static constexpr Eigen::Index kDenseLimit = 256;
  const QuboInstance& qubo_;
  int k_;
  Eigen::Index n_;
  Eigen::MatrixXd dense_;
  std::vector<double> kernel_rows_;  // g(|r - s|), zero on the diagonal
};

struct Slice {
  std::vector<std::int8_t> spin;
  Eigen::VectorXd field;
  double energy = 0.0;
  bool dirty = true;
};

// Greedy repair straight from a spin vector; mirrors decode_values.
class Repairer {
 public:
  explicit Repairer(const QuboInstance& qubo) : qubo_(qubo), k_(qubo.k()) {
    taken_.resize(k_);
  }

  const std::vector<int>& operator()(const std::vector<std::int8_t>& spin) {
    order_.assign(k_, -1);
    bool permutation = true;
    for (int v = 0; v < k_ && permutation; ++v) {
      int ones = 0;
      for (int r = 0; r < k_; ++r) {
        if (spin[static_cast<std::size_t>(v) * k_ + r] > 0) {
          ++ones;
          if (order_[r] != -1) permutation = false;
          order_[r] = v;
        }
      }
      if (ones != 1) permutation = false;
    }
    if (permutation) return order_;
    std::fill(taken_.begin(), taken_.end(), 0);
    const auto& q = qubo_.backlogs();
    const auto& ids = qubo_.tasks();
    for (int r = 0; r < k_; ++r) {
      int best = -1;
      for (int v = 0; v < k_; ++v) {
        if (taken_[v]) continue;
        if (best < 0) { best = v; continue; }
        const int xv = spin[static_cast<std::size_t>(v) * k_ + r] > 0;
        const int xb = spin[static_cast<std::size_t>(best) * k_ + r] > 0;
        if (xv != xb) { if (xv > xb) best = v; }
        else if (q[v] != q[best]) { if (q[v] > q[best]) best = v; }
        else if (ids[v] < ids[best]) best = v;
      }
      taken_[best] = 1;
      order_[r] = best;
    }
    return order_;
  }

 private:
  const QuboInstance& qubo_;
  int k_;
  std::vector<int> order_;
  std::vector<char> taken_;
};

bool is_permutation_spins(const std::vector<std::int8_t>& spin, int k) {
  for (int v = 0; v < k; ++v) {
    int ones = 0;
    for (int r = 0; r < k; ++r) ones += spin[static_cast<std::size_t>(v) * k + r] > 0;
    if (ones != 1) return false;
  }
  for (int r = 0; r < k; ++r) {
    int ones = 0;
    for (int v = 0; v < k; ++v) ones += spin[static_cast<std::size_t>(v) * k + r] > 0;
    if (ones != 1) return false;
  }
  return true;
}

struct Schedule {
  double temperature;
  double j_perp;  // inter-slice coupling, ignored for one slice
};

SolveResult anneal(const QuboInstance& qubo, const AnnealConfig& config, int slices,
                   const std::function<Schedule(int sweep)>& schedule) {
  const auto start = Clock::now();
  const int k = qubo.k();
  const Eigen::Index n = qubo.size();
  Rng rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Couplings couplings(qubo);
  Repairer repair(qubo);

  SolveResult result;
  result.energy = std::numeric_limits<double>::infinity();
  result.raw_energy = std::numeric_limits<double>::infinity();
  bool raw_is_permutation = false;

  auto offer = [&](const std::vector<int>& order) {
    const double e = qubo.permutation_energy(order);
    if (e < result.energy ||
        (e == result.energy && order < result.assignment.order)) {
      result.energy = e;
      result.assignment.order = order;
    }
  };

  const bool budgeted = config.time_budget != std::chrono::microseconds::max();
  auto out_of_time = [&] {
    return budgeted && Clock::now() - start >= config.time_budget;
  };

  std::vector<Slice> replica(static_cast<std::size_t>(slices));
  std::vector<int> perm(k);
  bool stop = false;
  const double inv_slices = 1.0 / slices;

  for (int read = 0; read < config.reads && !stop; ++read) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    // Same feasible permutation in every slice.
    Slice init;
    init.spin.assign(static_cast<std::size_t>(n), -1);
    for (int r = 0; r < k; ++r) init.spin[static_cast<std::size_t>(perm[r]) * k + r] = 1;
    // f_i = h_i + sum_j J_ij s_j = h_i - sum_j J_ij + 2 sum_{j: s_j=+1} J_ij,
    // and h_i - sum_j J_ij = a_i / 2.
    init.field = 0.5 * qubo.linear();
    for (int r = 0; r < k; ++r) {
      couplings.add_row(static_cast<Eigen::Index>(perm[r]) * k + r, 2.0, init.field.data());
    }
    init.energy = qubo.permutation_energy(perm);
    for (auto& s : replica) s = init;

    offer(perm);
    if (read == 0) result.initial_energy = result.energy;
    if (init.energy < result.raw_energy) {
      result.raw_energy = init.energy;
      raw_is_permutation = true;
    }

    for (int sweep = 0; sweep < config.sweeps; ++sweep) {
      if (out_of_time()) { stop = true; break; }
      const Schedule sch = schedule(sweep);
      const double beta = 1.0 / sch.temperature;
      for (int p = 0; p < slices; ++p) {
        auto& slice = replica[p];
        const auto* prev = slices > 1 ? replica[(p + slices - 1) % slices].spin.data() : nullptr;
        const auto* next = slices > 1 ? replica[(p + 1) % slices].spin.data() : nullptr;
        for (Eigen::Index i = 0; i < n; ++i) {
          const int s = slice.spin[i];
          const double d_classical = -2.0 * s * slice.field[i];
          double d_total = slices > 1 ? d_classical * inv_slices : d_classical;
          if (slices > 1) d_total += 2.0 * sch.j_perp * s * (prev[i] + next[i]);
          if (d_total > 0.0 && unit(rng) >= std::exp(-d_total * beta)) continue;
          const int flipped = -s;
          slice.spin[i] = static_cast<std::int8_t>(flipped);
          slice.energy += d_classical;
          couplings.add_row(i, 2.0 * flipped, slice.field.data());
          slice.dirty = true;
          if (slice.energy < result.raw_energy - 1e-12) {
            result.raw_energy = slice.energy;
            raw_is_permutation = is_permutation_spins(slice.spin, k);
          }
        }
      }
      for (auto& slice : replica) {
        if (!slice.dirty) continue;
        offer(repair(slice.spin));
        slice.dirty = false;
      }
      ++result.sweeps_used;
    }
  }

  result.feasible_at_readout = raw_is_permutation;
  result.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
  return result;
}

}  // namespace

SolveResult solve_sqa(const QuboInstance& qubo, const AnnealConfig& config) {
  config.validate();
  const double t = config.temperature > 0.0 ? config.temperature : auto_temperature(qubo);
  const int p = config.trotter_slices;
  const int sweeps = config.sweeps;
  auto schedule = [&](int sweep) {
    const double frac = sweeps > 1 ? static_cast<double>(sweep) / (sweeps - 1) : 1.0;
    // Gamma is expressed in units of the slice temperature P*T so one schedule
    // fits instances of any energy scale.
    const double gamma = (config.gamma_initial + (config.gamma_final - config.gamma_initial) * frac) * p * t;
    const double j_perp = -0.5 * t * std::log(std::tanh(gamma / (p * t)));
    return Schedule{t, j_perp};
  };
  return anneal(qubo, config, p, schedule);
}

SolveResult solve_sa(const QuboInstance& qubo, const AnnealConfig& config) {
  config.validate();
  const double t = config.temperature > 0.0 ? config.temperature : auto_temperature(qubo);
  const double hot = 2.0 * t, cold = 0.01 * t;
  const int sweeps = config.sweeps;
  auto schedule = [&](int sweep) {
    const double frac = sweeps > 1 ? static_cast<double>(sweep) / (sweeps - 1) : 1.0;
    return Schedule{hot * std::pow(cold / hot, frac), 0.0};
  };
  return anneal(qubo, config, 1, schedule);
}

SolveResult solve_exhaustive(const QuboInstance& qubo) {
  if (qubo.k() > kExhaustiveMaxK) {
    throw ExhaustiveGuardError("solve_exhaustive: K=" + std::to_string(qubo.k()) +
                               " exceeds the enumeration guard K <= " +
                               std::to_string(kExhaustiveMaxK));
  }
  const auto start = Clock::now();
  std::vector<int> order(qubo.k());
  std::iota(order.begin(), order.end(), 0);
  SolveResult result;
  result.energy = std::numeric_limits<double>::infinity();
  do {
    const double e = qubo.permutation_energy(order);
    if (e < result.energy) {
      result.energy = e;
      result.assignment.order = order;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  result.raw_energy = result.energy;
  result.initial_energy = result.energy;
  result.feasible_at_readout = true;
  result.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
  return result;
}

}  // namespace qgars
