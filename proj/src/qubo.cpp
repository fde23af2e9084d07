#include "qgars/qubo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace qgars {

std::vector<int> RankAssignment::ranks() const {
  std::vector<int> r(order.size(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<int>(i) + 1;
  return r;
}

bool RankAssignment::valid() const {
  std::vector<char> seen(order.size(), 0);
  for (int v : order) {
    if (v < 0 || v >= k() || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

double linear_cost(double backlog, int rank) { return backlog * rank; }

double interference(double qv, double qu, double qmax) {
  if (!(qmax > 0.0)) return 0.0;
  return qv * qu / (qmax * qmax);
}

double kernel(int delta, double beta) {
  return std::exp(-beta * static_cast<double>(delta));
}

namespace {

Eigen::MatrixXd interference_of(const Eigen::VectorXd& q) {
  const double qmax = q.size() ? q.maxCoeff() : 0.0;
  if (!(qmax > 0.0)) return Eigen::MatrixXd::Zero(q.size(), q.size());
  Eigen::MatrixXd m = (q * q.transpose()) / (qmax * qmax);
  m.diagonal().setZero();
  return m;
}

}  // namespace

double calibrate_penalty(std::span<const double> backlogs) {
  if (backlogs.empty()) throw EmptyWindowError("calibrate_penalty: empty window");
  const Eigen::Map<const Eigen::VectorXd> q(backlogs.data(),
                                            static_cast<Eigen::Index>(backlogs.size()));
  const double k = static_cast<double>(backlogs.size());
  const Eigen::VectorXd marginal = q * k + interference_of(q).rowwise().sum();
  return marginal.maxCoeff();
}

QuboInstance QuboInstance::build(std::span<const WindowEntry> window, double beta) {
  if (window.empty()) throw EmptyWindowError("QUBO build: active window is empty");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("QUBO build: beta must be a positive finite number");
  }
  QuboInstance qubo;
  qubo.k_ = static_cast<int>(window.size());
  qubo.beta_ = beta;
  qubo.backlogs_.resize(qubo.k_);
  for (int v = 0; v < qubo.k_; ++v) {
    if (!(window[v].backlog >= 0.0) || !std::isfinite(window[v].backlog)) {
      throw std::invalid_argument("QUBO build: backlogs must be finite and >= 0");
    }
    qubo.tasks_.push_back(window[v].task);
    qubo.backlogs_[v] = window[v].backlog;
  }
  qubo.interference_ = interference_of(qubo.backlogs_);

  std::vector<double> q(qubo.backlogs_.data(), qubo.backlogs_.data() + qubo.k_);
  qubo.penalty_ = calibrate_penalty(q);
  // An all-zero window calibrates to 0; keep a unit penalty so one-hot
  // feasibility is still enforced.
  if (!(qubo.penalty_ > 0.0)) qubo.penalty_ = 1.0;

  qubo.decay_.assign(static_cast<std::size_t>(qubo.k_), 0.0);
  for (int d = 1; d < qubo.k_; ++d) qubo.decay_[d] = kernel(d, beta);

  const double a = qubo.penalty_;
  qubo.linear_.resize(qubo.size());
  for (int v = 0; v < qubo.k_; ++v) {
    for (int r = 1; r <= qubo.k_; ++r) {
      qubo.linear_[qubo.index(v, r)] = linear_cost(qubo.backlogs_[v], r) - 2.0 * a;
    }
  }
  qubo.offset_ = 2.0 * qubo.k_ * a;
  return qubo;
}

double QuboInstance::quadratic(Eigen::Index i, Eigen::Index j) const {
  if (i == j || i < 0 || j < 0 || i >= size() || j >= size()) {
    throw std::out_of_range("QuboInstance::quadratic: bad index pair");
  }
  const int v = static_cast<int>(i / k_), r = static_cast<int>(i % k_);
  const int u = static_cast<int>(j / k_), s = static_cast<int>(j % k_);
  if (v == u || r == s) return 2.0 * penalty_;
  return decay_[std::abs(r - s)] * interference_(v, u);
}

Eigen::MatrixXd QuboInstance::dense_quadratic() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size(), size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    for (Eigen::Index j = i + 1; j < size(); ++j) m(i, j) = quadratic(i, j);
  }
  return m;
}

double QuboInstance::permutation_cost(std::span<const int> order) const {
  double h = 0.0;
  const int n = static_cast<int>(order.size());
  for (int r = 0; r < n; ++r) {
    h += linear_cost(backlogs_[order[r]], r + 1);
    for (int s = 0; s < r; ++s) h += decay_[r - s] * interference_(order[r], order[s]);
  }
  return h;
}

double QuboInstance::permutation_energy(std::span<const int> order) const {
  if (static_cast<int>(order.size()) != k_) {
    throw std::invalid_argument("permutation_energy: order length differs from K");
  }
  return permutation_cost(order);
}

Eigen::VectorXi one_hot(const RankAssignment& assignment) {
  const int k = assignment.k();
  Eigen::VectorXi x = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(k) * k);
  for (int r = 0; r < k; ++r) x[static_cast<Eigen::Index>(assignment.order[r]) * k + r] = 1;
  return x;
}

RankAssignment decode_values(const QuboInstance& qubo, std::span<const double> x) {
  const int k = qubo.k();
  if (static_cast<Eigen::Index>(x.size()) != qubo.size()) {
    throw std::invalid_argument("decode: variable count differs from K^2");
  }
  RankAssignment out;
  out.order.assign(k, -1);

  // Fast path: exact permutation matrix.
  bool permutation = true;
  for (int v = 0; v < k && permutation; ++v) {
    int ones = 0;
    for (int r = 0; r < k; ++r) {
      const double value = x[static_cast<std::size_t>(v) * k + r];
      if (value == 1.0) {
        ++ones;
        if (out.order[r] != -1) permutation = false;
        out.order[r] = v;
      } else if (value != 0.0) {
        permutation = false;
      }
    }
    if (ones != 1) permutation = false;
  }
  if (permutation && out.valid()) return out;

  std::vector<char> taken(k, 0);
  const auto& q = qubo.backlogs();
  const auto& ids = qubo.tasks();
  for (int r = 0; r < k; ++r) {
    int best = -1;
    for (int v = 0; v < k; ++v) {
      if (taken[v]) continue;
      if (best < 0) {
        best = v;
        continue;
      }
      const double xv = x[static_cast<std::size_t>(v) * k + r];
      const double xb = x[static_cast<std::size_t>(best) * k + r];
      if (xv != xb) {
        if (xv > xb) best = v;
      } else if (q[v] != q[best]) {
        if (q[v] > q[best]) best = v;
      } else if (ids[v] < ids[best]) {
        best = v;
      }
    }
    taken[best] = 1;
    out.order[r] = best;
  }
  return out;
}

void dump(const QuboInstance& qubo, std::ostream& os) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "# qubo k=%d beta=%.17g penalty=%.17g\n", qubo.k(),
                qubo.beta(), qubo.penalty_a());
  os << buf;
  for (int v = 0; v < qubo.k(); ++v) {
    std::snprintf(buf, sizeof buf, "# task %u %.17g\n", qubo.tasks()[v], qubo.backlogs()[v]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "-1 -1 %.17g\n", qubo.offset());
  os << buf;
  for (Eigen::Index i = 0; i < qubo.size(); ++i) {
    if (qubo.linear()[i] != 0.0) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(i),
                    static_cast<long>(i), qubo.linear()[i]);
      os << buf;
    }
  }
  for (Eigen::Index i = 0; i < qubo.size(); ++i) {
    for (Eigen::Index j = i + 1; j < qubo.size(); ++j) {
      const double c = qubo.quadratic(i, j);
      if (c != 0.0) {
        std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(i),
                      static_cast<long>(j), c);
        os << buf;
      }
    }
  }
}

QuboInstance load(std::istream& is) {
  std::string line;
  int k = -1;
  double beta = 0.0, penalty = 0.0;
  std::vector<WindowEntry> window;
  struct Row { long i, j; double value; };
  std::vector<Row> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string tag;
      ls >> tag;
      if (tag == "qubo") {
        std::string kv;
        while (ls >> kv) {
          auto eq = kv.find('=');
          if (eq == std::string::npos) continue;
          auto key = kv.substr(0, eq);
          auto val = kv.substr(eq + 1);
          if (key == "k") k = std::stoi(val);
          else if (key == "beta") beta = std::stod(val);
          else if (key == "penalty") penalty = std::stod(val);
        }
      } else if (tag == "task") {
        WindowEntry e;
        if (!(ls >> e.task >> e.backlog)) throw ConfigError("qubo load: bad task line: " + line);
        window.push_back(e);
      }
      continue;
    }
    std::istringstream ls(line);
    Row row{};
    if (!(ls >> row.i >> row.j >> row.value)) {
      throw ConfigError("qubo load: bad coefficient line: " + line);
    }
    rows.push_back(row);
  }
  if (k < 1 || static_cast<int>(window.size()) != k) {
    throw ConfigError("qubo load: header declares k=" + std::to_string(k) + " but lists " +
                      std::to_string(window.size()) + " tasks");
  }
  auto qubo = QuboInstance::build(window, beta);
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
  };
  if (!close(qubo.penalty_a(), penalty)) {
    throw ConfigError("qubo load: penalty in header does not match the rebuilt instance");
  }
  for (const auto& row : rows) {
    double expected = 0.0;
    if (row.i == -1 && row.j == -1) expected = qubo.offset();
    else if (row.i == row.j) expected = qubo.linear()[row.i];
    else expected = qubo.quadratic(row.i, row.j);
    if (!close(expected, row.value)) {
      throw ConfigError("qubo load: coefficient (" + std::to_string(row.i) + ", " +
                        std::to_string(row.j) + ") does not match the window");
    }
  }
  return qubo;
}

}  // namespace qgars
