#include "oracles.hpp"
#include "qgars/adaptive.hpp"
#include "qgars/rng.hpp"
#include "qgars/window.hpp"

#include <doctest.h>

#include <numbers>

using namespace qgars;

namespace {

TaskState ready(TaskId id, double q, double predicted = -1.0, Epoch since = 0) {
  TaskState s;
  s.spec = id;
  s.backlog = q;
  s.remaining_work = q;
  s.predicted_remaining = predicted < 0.0 ? q : predicted;
  s.status = TaskStatus::ready;
  s.ready_epoch = since;
  return s;
}

RateAllocation shares(std::vector<TaskId> ids, std::vector<double> theta) {
  RateAllocation a;
  a.tasks = std::move(ids);
  a.shares = Eigen::Map<Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  return a;
}

QuantumExpertConfig prior() {
  QuantumExpertConfig c;
  c.anneal = AnnealConfig::unlimited();
  return c;
}

}  // namespace

TEST_CASE("delay pressure") {
  const std::vector<TaskState> one{ready(0, 2)};
  CHECK(delay_pressure(one, shares({0}, {0.5})) == doctest::Approx(4.0));
  const std::vector<TaskState> idle{ready(0, 0), ready(1, 0)};
  CHECK(delay_pressure(idle, shares({0, 1}, {0.3, 0.7})) == 0.0);
  const std::vector<TaskState> two{ready(0, 1), ready(1, 1)};
  CHECK(delay_pressure(two, shares({0, 1}, {0.5, 0.5})) == doctest::Approx(4.0));
  CHECK_THROWS_AS(delay_pressure(two, shares({0}, {1.0})), ContractViolation);
}

TEST_CASE("shadow losses normalize by the running maximum") {
  TrustState t;
  auto l = shadow_losses(4, 8, t);
  CHECK(t.running_max == 8.0);
  CHECK(l.quantum == doctest::Approx(0.5));
  CHECK(l.robust == doctest::Approx(1.0));
  l = shadow_losses(2, 2, t);
  CHECK(l.quantum == doctest::Approx(0.25));
  CHECK(l.robust == doctest::Approx(0.25));
  l = shadow_losses(0, 0, t);
  CHECK(l.quantum == 0.0);
  CHECK(l.robust == 0.0);
  CHECK(t.running_max == 8.0);
}

TEST_CASE("hedge update examples") {
  TrustState t;
  t.lambda = 0.5;
  t.eta = std::numbers::ln2;
  CHECK(hedge_update(t, 0.3, 0.3).lambda == doctest::Approx(0.5));
  CHECK(hedge_update(t, 1, 0).lambda == doctest::Approx(1.0 / 3));
  CHECK(hedge_update(t, 0, 1).lambda == doctest::Approx(2.0 / 3));
  const auto n = hedge_update(t, 1, 0);
  CHECK(n.cum_loss_q == 1.0);
  CHECK(n.cum_loss_b == 0.0);
  CHECK(n.cum_loss_mixed == doctest::Approx(0.5));
}

TEST_CASE("hedge update agrees with the closed-form exponential weights") {
  Rng rng(30);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TrustState t;
  t.eta = 0.2;
  t.lambda_floor = 0.0;
  double cq = 0.0, cb = 0.0;
  for (int i = 0; i < 300; ++i) {
    const double lq = u(rng), lb = u(rng);
    t = hedge_update(t, lq, lb);
    cq += lq;
    cb += lb;
    CHECK(t.lambda == doctest::Approx(oracle::hedge_lambda(0.5, 0.2, cq, cb)).epsilon(1e-9));
  }
}

TEST_CASE("mixing") {
  const auto q = shares({0, 1}, {0.8, 0.2});
  const auto b = shares({0, 1}, {0.4, 0.6});
  const auto m = mix_rates(0.5, q, b);
  CHECK(m.shares[0] == doctest::Approx(0.6));
  CHECK(m.shares[1] == doctest::Approx(0.4));
  CHECK(mix_rates(1.0, q, b).shares == q.shares);
  CHECK(mix_rates(0.0, q, b).shares == b.shares);
  CHECK_THROWS_AS(mix_rates(0.5, q, shares({0, 2}, {0.5, 0.5})), ContractViolation);
  CHECK_THROWS_AS(mix_rates(1.5, q, b), ContractViolation);
}

TEST_CASE("default learning rate") {
  CHECK(default_eta(8 * std::numbers::ln2) == doctest::Approx(1.0));
  CHECK(default_eta(1000) == doctest::Approx(0.07446).epsilon(1e-4));
  double prev = default_eta(1);
  for (double t = 2; t < 1e7; t *= 3) {
    CHECK(default_eta(t) < prev);
    prev = default_eta(t);
  }
  CHECK(default_eta(1e12) < 1e-5);
  CHECK_THROWS(default_eta(0.5));
}

TEST_CASE("quantum expert") {
  const std::vector<TaskState> one{ready(3, 5)};
  const auto d1 = expert_quantum(one, 0, prior());
  REQUIRE(d1);
  CHECK(d1->alloc.shares[0] == 1.0);

  const std::vector<TaskState> two{ready(0, 4), ready(1, 2)};
  const auto d2 = expert_quantum(two, 0, prior());
  REQUIRE(d2);
  CHECK(d2->label == Expert::quantum_guided);
  CHECK(d2->alloc.share(0) == doctest::Approx(2.0 / 3));
  CHECK(d2->alloc.share(1) == doctest::Approx(1.0 / 3));

  CHECK_FALSE(expert_quantum({}, 0, prior()));
  CHECK_FALSE(policy_static_prior({}, 0, prior()));
  const auto st = policy_static_prior(two, 0, prior());
  REQUIRE(st);
  CHECK(st->shares == d2->alloc.shares);
}

TEST_CASE("robust expert") {
  const std::vector<TaskState> two{ready(0, 4), ready(1, 2)};
  const auto d = expert_robust(two, 0);
  REQUIRE(d);
  CHECK(d->alloc.shares[0] == doctest::Approx(2.0 / 3));
  const std::vector<TaskState> flat{ready(0, 3), ready(1, 3), ready(2, 3)};
  CHECK((expert_robust(flat, 0)->alloc.shares.array() - 1.0 / 3).abs().maxCoeff() < 1e-12);
  const std::vector<TaskState> zeros{ready(0, 0), ready(1, 0)};
  CHECK(expert_robust(zeros, 0)->alloc.shares[0] == doctest::Approx(0.5));
  CHECK_FALSE(expert_robust({}, 0));
}

TEST_CASE("srpt ordering") {
  const std::vector<TaskState> r{ready(1, 3), ready(2, 1), ready(3, 2)};
  CHECK(srpt_order(r, false) == std::vector<TaskId>{2, 3, 1});
  const std::vector<TaskState> ties{ready(5, 2), ready(4, 2)};
  CHECK(srpt_order(ties, false) == std::vector<TaskId>{4, 5});
  const auto a = policy_srpt(r, 0, 10, WeightProfile{}, false);
  REQUIRE(a);
  CHECK(a->size() == 3);
  CHECK(a->share(2) > a->share(3));
  CHECK(a->share(3) > a->share(1));
}

TEST_CASE("active window") {
  const std::vector<TaskState> r{ready(0, 4, 2), ready(1, 4, 1)};
  CHECK(select_active_window(r, 1) == std::vector<TaskId>{1});
  CHECK(select_active_window(r, 5).size() == 2);
  const std::vector<TaskState> tie{ready(0, 2, 1, 7), ready(1, 2, 1, 3)};
  CHECK(select_active_window(tie, 1) == std::vector<TaskId>{1});
}

TEST_CASE("property: lambda stays in [0, 1] and moves away from the worse expert") {
  Rng rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int seq = 0; seq < 20; ++seq) {
    TrustState t;
    t.eta = 0.05 + seq * 0.2;
    for (int i = 0; i < 500; ++i) {
      const double lq = u(rng), lb = u(rng);
      const auto n = hedge_update(t, lq, lb);
      CHECK(n.lambda >= 0.0);
      CHECK(n.lambda <= 1.0);
      if (t.lambda > t.lambda_floor && t.lambda < 1.0 - t.lambda_floor) {
        if (lq > lb) CHECK(n.lambda < t.lambda);
        if (lq < lb) CHECK(n.lambda > t.lambda);
      }
      t = n;
    }
  }
}

TEST_CASE("property: mixing is convex in delay pressure") {
  Rng rng(32);
  std::uniform_real_distribution<double> u(0.0, 1.0), q(0.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 7;
    std::vector<TaskState> r;
    std::vector<TaskId> ids;
    for (std::size_t i = 0; i < n; ++i) {
      r.push_back(ready(static_cast<TaskId>(i), q(rng)));
      ids.push_back(static_cast<TaskId>(i));
    }
    const auto dq = expert_quantum(r, 0, prior());
    const auto db = expert_robust(r, 0);
    const double lam = u(rng);
    const auto m = mix_rates(lam, dq->alloc, db->alloc);
    check_feasible(m);
    CHECK(delay_pressure(r, m) <=
          lam * delay_pressure(r, dq->alloc) + (1 - lam) * delay_pressure(r, db->alloc) + 1e-9);
  }
}

TEST_CASE("property: regret stays within the bound on adversarial sequences") {
  const int horizon = 1000;
  const double eta = default_eta(horizon);
  Rng rng(33);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int seq = 0; seq < 10; ++seq) {
    TrustState t;
    t.eta = eta;
    t.lambda_floor = 0.0;
    for (int i = 0; i < horizon; ++i) {
      // Punish whichever expert currently carries more weight.
      const double hi = 0.5 + 0.5 * u(rng), lo = 0.5 * u(rng);
      t = t.lambda >= 0.5 ? hedge_update(t, hi, lo) : hedge_update(t, lo, hi);
    }
    CHECK(t.cum_loss_mixed <= std::min(t.cum_loss_q, t.cum_loss_b) + hedge_regret_bound(eta, horizon));
  }
}
