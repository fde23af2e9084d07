#include "oracles.hpp"
#include "qgars/qubo.hpp"
#include "qgars/rng.hpp"

#include <doctest.h>

#include <sstream>

using namespace qgars;

namespace {

QuboInstance make(const std::vector<double>& q, double beta = 1.0) {
  std::vector<WindowEntry> w;
  for (std::size_t i = 0; i < q.size(); ++i) w.push_back({static_cast<TaskId>(10 + i), q[i]});
  return QuboInstance::build(w, beta);
}

Eigen::VectorXi as_vector(const std::vector<int>& x) {
  return Eigen::Map<const Eigen::VectorXi>(x.data(), static_cast<Eigen::Index>(x.size()));
}

std::vector<double> random_backlogs(Rng& rng, int k) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> q(static_cast<std::size_t>(k));
  for (auto& x : q) x = u(rng);
  return q;
}

}  // namespace

TEST_CASE("linear cost, interference and kernel") {
  CHECK(linear_cost(0, 5) == 0.0);
  CHECK(linear_cost(4, 2) == 8.0);
  CHECK(linear_cost(2, 1) == 2.0);

  CHECK(interference(3, 3, 3) == doctest::Approx(1.0));
  CHECK(interference(4, 2, 4) == doctest::Approx(0.5));
  CHECK(interference(0, 5, 5) == 0.0);

  CHECK(kernel(1, 1.0) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK(kernel(3, 1.0) == doctest::Approx(0.049787).epsilon(1e-5));
  CHECK(kernel(1, 50.0) < 1e-21);
}

TEST_CASE("penalty calibration") {
  const std::vector<double> one{3}, two{4, 2}, three{1, 1, 1};
  CHECK(calibrate_penalty(one) == doctest::Approx(3.0));
  CHECK(calibrate_penalty(two) == doctest::Approx(8.5));
  CHECK(calibrate_penalty(three) == doctest::Approx(5.0));
  CHECK_THROWS_AS(calibrate_penalty(std::span<const double>{}), EmptyWindowError);
}

TEST_CASE("build rejects an empty window") {
  CHECK_THROWS_AS(QuboInstance::build({}, 1.0), EmptyWindowError);
}

TEST_CASE("single-task instance") {
  const auto q = make({3});
  CHECK(energy(q, Eigen::VectorXi::Ones(1)) == doctest::Approx(3.0));
  CHECK(energy(q, Eigen::VectorXi::Zero(1)) == doctest::Approx(6.0));
}

TEST_CASE("two-task instance energies") {
  const auto q = make({4, 2});
  CHECK(q.penalty_a() == doctest::Approx(8.5));
  CHECK(energy(q, Eigen::VectorXi::Zero(4)) == doctest::Approx(34.0));
  const std::vector<int> identity{0, 1}, swapped{1, 0};
  CHECK(q.permutation_energy(identity) == doctest::Approx(8.0 + std::exp(-1.0) * 0.5));
  CHECK(q.permutation_energy(identity) == doctest::Approx(8.1839).epsilon(1e-4));
  CHECK(q.permutation_energy(swapped) == doctest::Approx(10.1839).epsilon(1e-4));

  // Exhaustive: the identity is the unique minimizer over all 16 vectors.
  double best = INFINITY;
  int best_mask = -1;
  for (int mask = 0; mask < 16; ++mask) {
    Eigen::VectorXi x(4);
    for (int i = 0; i < 4; ++i) x[i] = (mask >> i) & 1;
    const double e = energy(q, x);
    if (e < best) {
      best = e;
      best_mask = mask;
    }
  }
  CHECK(best_mask == 0b1001);  // x_{0,1} and x_{1,2}
}

TEST_CASE("energy matches the direct-summation oracle on every binary vector") {
  Rng rng(3);
  for (int k = 1; k <= 3; ++k) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto qs = random_backlogs(rng, k);
      const double beta = 0.5 + trial;
      const auto q = make(qs, beta);
      const int n = k * k;
      for (int mask = 0; mask < (1 << n); ++mask) {
        std::vector<int> x(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) x[i] = (mask >> i) & 1;
        REQUIRE(energy(q, as_vector(x)) == doctest::Approx(oracle::energy(qs, beta, x)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("permutation energy agrees with the one-hot energy") {
  Rng rng(4);
  for (int k = 1; k <= 6; ++k) {
    const auto qs = random_backlogs(rng, k);
    const auto q = make(qs);
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    do {
      const double direct = oracle::energy(qs, 1.0, oracle::encode(order));
      CHECK(q.permutation_energy(order) == doctest::Approx(direct).epsilon(1e-12));
      CHECK(q.permutation_cost(order) == doctest::Approx(direct).epsilon(1e-12));
    } while (k <= 4 && std::next_permutation(order.begin(), order.end()));
  }
}

TEST_CASE("dense quadratic agrees with the on-demand coefficients") {
  const auto q = make({5, 1, 3});
  const auto d = q.dense_quadratic();
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    for (Eigen::Index j = i + 1; j < q.size(); ++j) {
      CHECK(d(i, j) == doctest::Approx(q.quadratic(i, j)));
      CHECK(q.quadratic(j, i) == doctest::Approx(q.quadratic(i, j)));
      CHECK(d(j, i) == 0.0);
    }
  }
}

TEST_CASE("decode keeps permutations and repairs the rest") {
  const auto q = make({4, 2});
  Eigen::VectorXi identity(4);
  identity << 1, 0, 0, 1;
  CHECK(decode(q, identity).order == std::vector<int>{0, 1});

  CHECK(decode(q, Eigen::VectorXi::Zero(4)).order == std::vector<int>{0, 1});
  const auto low_first = make({2, 4});
  CHECK(decode(low_first, Eigen::VectorXi::Zero(4)).order == std::vector<int>{1, 0});

  Eigen::VectorXi doubled(4);  // task 0 on both ranks
  doubled << 1, 1, 0, 0;
  const auto a = decode(q, doubled);
  CHECK(a.order == std::vector<int>{0, 1});
  CHECK(a.valid());
}

TEST_CASE("dump and load round-trip") {
  const auto q = make({4.25, 0.5, 7.0}, 0.75);
  std::stringstream ss;
  dump(q, ss);
  const auto back = load(ss);
  CHECK(back.k() == 3);
  CHECK(back.beta() == doctest::Approx(0.75));
  CHECK(back.tasks() == q.tasks());
  const std::vector<int> order{2, 0, 1};
  CHECK(back.permutation_energy(order) == doctest::Approx(q.permutation_energy(order)));
}

TEST_CASE("property: single-bit flips of a feasible vector never lower the energy") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 1 + trial % 4;
    const auto qs = random_backlogs(rng, k);
    const auto q = make(qs);
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    do {
      auto x = oracle::encode(order);
      const double base = energy(q, as_vector(x));
      for (auto& bit : x) {
        bit ^= 1;
        CHECK(energy(q, as_vector(x)) >= base);
        bit ^= 1;
      }
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

TEST_CASE("property: uniform backlogs with fast decay make every permutation optimal") {
  for (int k = 2; k <= 5; ++k) {
    const auto q = make(std::vector<double>(static_cast<std::size_t>(k), 3.0), 60.0);
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    const double e0 = q.permutation_energy(order);
    while (std::next_permutation(order.begin(), order.end())) {
      CHECK(q.permutation_energy(order) == doctest::Approx(e0).epsilon(1e-9));
    }
  }
}

TEST_CASE("property: with fast decay the optimum sorts by descending backlog") {
  Rng rng(9);
  for (int k = 2; k <= 6; ++k) {
    const auto qs = random_backlogs(rng, k);
    const auto scan = oracle::scan_permutations(qs, 60.0);
    std::vector<int> sorted(k);
    std::iota(sorted.begin(), sorted.end(), 0);
    std::sort(sorted.begin(), sorted.end(), [&](int a, int b) { return qs[a] > qs[b]; });
    REQUIRE(scan.minimizers.size() == 1);
    CHECK(scan.minimizers[0] == sorted);
    CHECK(make(qs, 60.0).permutation_energy(sorted) == doctest::Approx(scan.min_energy));
  }
}

TEST_CASE("property: input order does not change the minimal energy") {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + trial % 4;
    auto qs = random_backlogs(rng, k);
    auto min_energy = [&](const std::vector<double>& backlogs) {
      const auto q = make(backlogs);
      std::vector<int> order(backlogs.size());
      std::iota(order.begin(), order.end(), 0);
      double best = INFINITY;
      do best = std::min(best, q.permutation_energy(order));
      while (std::next_permutation(order.begin(), order.end()));
      return best;
    };
    const double a = min_energy(qs);
    std::reverse(qs.begin(), qs.end());
    const double b = min_energy(qs);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}
