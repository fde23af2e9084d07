#pragma once
// Reference computations written straight from the model definitions, kept
// free of library internals so the tests compare two independent paths.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

inline double penalty(const std::vector<double>& q) {
  const int k = static_cast<int>(q.size());
  const double qmax = *std::max_element(q.begin(), q.end());
  double best = 0.0;
  for (int v = 0; v < k; ++v) {
    double s = q[v] * k;
    for (int u = 0; u < k; ++u) {
      if (u != v && qmax > 0.0) s += q[v] * q[u] / (qmax * qmax);
    }
    best = std::max(best, s);
  }
  return best > 0.0 ? best : 1.0;  // all-zero window keeps a unit penalty
}

/// H(x) for x indexed x[v * K + r - 1], by direct summation of the cost,
/// interference and squared one-hot penalty terms.
inline double energy(const std::vector<double>& q, double beta, const std::vector<int>& x) {
  const int k = static_cast<int>(q.size());
  const double qmax = *std::max_element(q.begin(), q.end());
  const double a = penalty(q);
  auto at = [&](int v, int r) { return x[v * k + r - 1]; };
  double h = 0.0;
  for (int v = 0; v < k; ++v) {
    for (int r = 1; r <= k; ++r) h += q[v] * r * at(v, r);
  }
  for (int v = 0; v < k; ++v) {
    for (int u = 0; u < k; ++u) {
      if (u == v) continue;
      const double big_q = qmax > 0.0 ? q[v] * q[u] / (qmax * qmax) : 0.0;
      for (int r = 1; r <= k; ++r) {
        for (int s = 1; s < r; ++s) h += std::exp(-beta * (r - s)) * big_q * at(v, r) * at(u, s);
      }
    }
  }
  for (int v = 0; v < k; ++v) {
    int row = 0;
    for (int r = 1; r <= k; ++r) row += at(v, r);
    h += a * (row - 1) * (row - 1);
  }
  for (int r = 1; r <= k; ++r) {
    int col = 0;
    for (int v = 0; v < k; ++v) col += at(v, r);
    h += a * (col - 1) * (col - 1);
  }
  return h;
}

/// One-hot vector of a permutation given as order[rank - 1] = position.
inline std::vector<int> encode(const std::vector<int>& order) {
  const int k = static_cast<int>(order.size());
  std::vector<int> x(static_cast<std::size_t>(k * k), 0);
  for (int r = 1; r <= k; ++r) x[order[r - 1] * k + r - 1] = 1;
  return x;
}

struct PermutationScan {
  double min_energy = 0.0;
  double max_energy = 0.0;
  std::vector<std::vector<int>> minimizers;  // orders within 1e-9 of the minimum
};

inline PermutationScan scan_permutations(const std::vector<double>& q, double beta) {
  std::vector<int> order(q.size());
  std::iota(order.begin(), order.end(), 0);
  PermutationScan s;
  s.min_energy = INFINITY;
  s.max_energy = -INFINITY;
  std::vector<std::pair<double, std::vector<int>>> all;
  do {
    const double e = energy(q, beta, encode(order));
    all.emplace_back(e, order);
    s.min_energy = std::min(s.min_energy, e);
    s.max_energy = std::max(s.max_energy, e);
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& [e, o] : all) {
    if (e <= s.min_energy + 1e-9) s.minimizers.push_back(o);
  }
  return s;
}

/// Sum w log theta.
inline double utility(const std::vector<double>& w, const std::vector<double>& theta) {
  double u = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) u += w[i] * std::log(theta[i]);
  return u;
}

/// Uniform point on the open simplex via normalized exponentials.
template <typename G>
std::vector<double> simplex_point(std::size_t n, G& gen) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& x : p) s += (x = e(gen) + 1e-300);
  for (auto& x : p) x /= s;
  return p;
}

/// Two-expert exponential weights, written independently of the library:
/// weights accumulate exp(-eta * cumulative loss).
inline double hedge_lambda(double lambda0, double eta, double cum_q, double cum_b) {
  const double m = std::min(cum_q, cum_b);
  const double wq = lambda0 * std::exp(-eta * (cum_q - m));
  const double wb = (1.0 - lambda0) * std::exp(-eta * (cum_b - m));
  return wq / (wq + wb);
}

}  // namespace oracle
