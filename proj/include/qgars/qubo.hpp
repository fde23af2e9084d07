#pragma once

#include "qgars/domain.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace qgars {

/// Raised when a QUBO is requested for an empty active window.
class EmptyWindowError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WindowEntry {
  TaskId task = 0;
  double backlog = 0.0;
};

/// Rank r of window position v is 1 + position of v in `order`;
/// order[r - 1] is the window position holding rank r.
struct RankAssignment {
  std::vector<int> order;

  int k() const { return static_cast<int>(order.size()); }
  std::vector<int> ranks() const;  // ranks()[v] = rank of position v
  bool valid() const;
};

// Building blocks of the rank-assignment Hamiltonian.
double linear_cost(double backlog, int rank);
double interference(double qv, double qu, double qmax);
double kernel(int delta, double beta);
double calibrate_penalty(std::span<const double> backlogs);

/// Rank-assignment QUBO over K^2 one-hot variables x_{v,r}.
///
/// Variables are flattened as index = v * K + (r - 1). The instance keeps the
/// structured pieces (backlogs, interference matrix, kernel table, penalty)
/// rather than a materialized K^2 x K^2 matrix; quadratic(i, j) evaluates a
/// coefficient on demand and dense_quadratic() materializes it for small K.
///
///   H(x) = sum_{v,r} q_v r x_{v,r}
///        + sum_{v != u} sum_{s < r} g(r - s) Q_{v,u} x_{v,r} x_{u,s}
///        + A sum_v (sum_r x_{v,r} - 1)^2 + A sum_r (sum_v x_{v,r} - 1)^2
///
/// Expanded, each variable carries q_v r - 2A, each same-task and same-rank
/// pair carries +2A, and the constant 2KA is retained.
class QuboInstance {
 public:
  static QuboInstance build(std::span<const WindowEntry> window, double beta);

  int k() const { return k_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(k_) * k_; }
  Eigen::Index index(int position, int rank) const {
    return static_cast<Eigen::Index>(position) * k_ + (rank - 1);
  }

  const std::vector<TaskId>& tasks() const { return tasks_; }
  const Eigen::VectorXd& backlogs() const { return backlogs_; }
  const Eigen::MatrixXd& interference_matrix() const { return interference_; }
  const Eigen::VectorXd& linear() const { return linear_; }
  double penalty_a() const { return penalty_; }
  double penalty_b() const { return penalty_; }
  double beta() const { return beta_; }
  double offset() const { return offset_; }
  /// g(delta) for delta in [1, K-1]; index 0 holds 0.
  double decay(int delta) const { return decay_[delta]; }

  /// Coefficient of x_i x_j (i != j, either order).
  double quadratic(Eigen::Index i, Eigen::Index j) const;
  /// Strictly upper-triangular K^2 x K^2 coefficient matrix.
  Eigen::MatrixXd dense_quadratic() const;

  /// H at the permutation matrix described by `order`; O(K^2).
  double permutation_energy(std::span<const int> order) const;
  /// H_cost only (no penalty) at a permutation.
  double permutation_cost(std::span<const int> order) const;

 private:
  int k_ = 0;
  double beta_ = 1.0;
  double penalty_ = 0.0;
  double offset_ = 0.0;
  std::vector<TaskId> tasks_;
  Eigen::VectorXd backlogs_;
  Eigen::MatrixXd interference_;
  Eigen::VectorXd linear_;
  std::vector<double> decay_;
};

/// Exact H(x), constant offset included. Cost is O(nnz(x)^2).
template <typename Derived>
double energy(const QuboInstance& qubo, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != qubo.size()) {
    throw std::invalid_argument("energy: expected " + std::to_string(qubo.size()) +
                                " variables, got " + std::to_string(x.size()));
  }
  std::vector<Eigen::Index> ones;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) != 0) ones.push_back(i);
  }
  double h = qubo.offset();
  for (std::size_t a = 0; a < ones.size(); ++a) {
    h += qubo.linear()[ones[a]];
    for (std::size_t b = a + 1; b < ones.size(); ++b) {
      h += qubo.quadratic(ones[a], ones[b]);
    }
  }
  return h;
}

/// One-hot encoding of an assignment, index = v * K + (r - 1).
Eigen::VectorXi one_hot(const RankAssignment& assignment);

/// Returns the permutation when x is a permutation matrix; otherwise repairs
/// greedily rank by rank (largest x_{v,r}, then larger backlog, then lower
/// task id).
template <typename Derived>
RankAssignment decode(const QuboInstance& qubo, const Eigen::MatrixBase<Derived>& x);

RankAssignment decode_values(const QuboInstance& qubo, std::span<const double> x);

template <typename Derived>
RankAssignment decode(const QuboInstance& qubo, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != qubo.size()) {
    throw std::invalid_argument("decode: expected " + std::to_string(qubo.size()) +
                                " variables, got " + std::to_string(x.size()));
  }
  std::vector<double> values(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) values[i] = static_cast<double>(x(i));
  return decode_values(qubo, values);
}

/// Plain-text coefficient dump: '#' header lines with K, beta, penalty and
/// the window, then "i j value" rows (i == j for linear terms, "-1 -1" for
/// the constant), nonzero entries only.
void dump(const QuboInstance& qubo, std::ostream& os);
/// Rebuilds an instance from dump() output; the coefficient rows are checked
/// against the rebuilt instance.
QuboInstance load(std::istream& is);

}  // namespace qgars
