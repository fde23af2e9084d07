#include "qgars/simulation.hpp"

#include <doctest.h>

#include <cmath>

using namespace qgars;

namespace {

Scenario single_task(double demand, double sla, Epoch release = 0) {
  Scenario sc;
  ComputeNode n;
  n.id = 0;
  n.capacity = Eigen::Vector2d(2.0, 3.0);
  sc.nodes.push_back(n);
  WorkflowDag w;
  w.sla_weight = sla;
  w.release_epoch = release;
  TaskSpec t;
  t.nominal_demand = demand;
  w.tasks.push_back(t);
  sc.workflows.push_back(w);
  return sc;
}

SimConfig quick(Epoch horizon) {
  SimConfig c;
  c.horizon = horizon;
  c.scheduler.prior.anneal = SimConfig::in_loop_anneal();
  return c;
}

Scenario random_scenario(std::uint64_t seed, std::size_t workflows, std::size_t nodes) {
  WorkloadParams p;
  p.count = workflows;
  p.compute_nodes = nodes;
  p.node_range = {5, 20};
  Scenario sc;
  sc.nodes = make_nodes(nodes, 2, seed);
  sc.workflows = generate_workload(p, seed);
  return sc;
}

constexpr PolicyKind kAll[] = {PolicyKind::qgars, PolicyKind::static_prior, PolicyKind::robust,
                               PolicyKind::srpt_pred};

}  // namespace

TEST_CASE("a lone task of demand 3 completes at epoch 3") {
  const auto sc = single_task(3.0, 1.5);
  for (auto p : kAll) {
    const auto r = run_episode(sc, quick(10), p, 1);
    CHECK(r.all_done);
    CHECK(r.epochs_run == 3);
    CHECK(r.wct == doctest::Approx(3 * 1.5));
    REQUIRE(r.workflows.size() == 1);
    CHECK(r.workflows[0].completion == 3);
    CHECK_FALSE(r.workflows[0].censored);
    CHECK(r.metrics.back().wct_partial == doctest::Approx(4.5));
  }
}

TEST_CASE("a failed node makes no progress and its share counts as blocked") {
  const auto sc = single_task(3.0, 1.0);
  auto c = quick(20);
  c.shock = ShockProfile{0, 2, 1.0, 1.0};
  const auto r = run_episode(sc, c, PolicyKind::robust, 1);
  REQUIRE(r.metrics.size() == 5);
  for (int t = 0; t < 2; ++t) {
    CHECK(r.metrics[t].failed_nodes == 1);
    CHECK(r.metrics[t].blocked_capacity_ratio == doctest::Approx(1.0));
    CHECK(r.metrics[t].utilization == 0.0);
  }
  for (int t = 2; t < 5; ++t) CHECK(r.metrics[t].blocked_capacity_ratio == 0.0);
  CHECK(r.wct == doctest::Approx(5.0));
}

TEST_CASE("idle epochs report zero utilization and backlog") {
  const auto sc = single_task(1.0, 1.0, 4);
  Simulation sim(sc, quick(10), PolicyKind::qgars, 1);
  for (int t = 0; t < 4; ++t) {
    const auto m = sim.step();
    CHECK(m.utilization == 0.0);
    CHECK(m.p95_backlog == 0.0);
    CHECK(m.active_tasks == 0);
  }
  CHECK(sim.step().utilization == doctest::Approx(1.0));
  CHECK(sim.finished());
  CHECK(sim.wct_partial() == doctest::Approx(1.0));
}

TEST_CASE("empty scenario") {
  auto sc = single_task(1.0, 1.0);
  sc.workflows.clear();
  const auto r = run_episode(sc, quick(10), PolicyKind::qgars, 1);
  CHECK(r.wct == 0.0);
  CHECK(r.all_done);
  CHECK(r.metrics.empty());
}

TEST_CASE("unfinished workflows are charged up to the horizon") {
  const auto sc = single_task(5.0, 2.0);
  const auto r = run_episode(sc, quick(3), PolicyKind::qgars, 1);
  CHECK_FALSE(r.all_done);
  REQUIRE(r.workflows.size() == 1);
  CHECK(r.workflows[0].censored);
  CHECK(r.workflows[0].completion == 3);
  CHECK(r.wct == doctest::Approx(6.0));
}

TEST_CASE("stepping past the horizon is an error") {
  const auto sc = single_task(5.0, 1.0);
  Simulation sim(sc, quick(2), PolicyKind::robust, 1);
  sim.step();
  sim.step();
  CHECK_THROWS_AS(sim.step(), std::logic_error);
}

TEST_CASE("configuration errors") {
  auto c = quick(10);
  c.horizon = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quick(10);
  c.shock = ShockProfile{5, 20, 0.1, 5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_policy("srpt_pred") == PolicyKind::srpt_pred);
  CHECK_THROWS_AS(parse_policy("fifo"), ConfigError);
}

TEST_CASE("policies under the same seed see the same environment") {
  const auto sc = random_scenario(3, 4, 3);
  auto c = quick(400);
  c.latency.alpha = 1.0;
  std::vector<std::vector<double>> realized;
  for (auto p : kAll) {
    Simulation sim(sc, c, p, 99);
    std::vector<double> d;
    for (TaskId id = 0; id < sc.task_count(); ++id) d.push_back(sim.realized_demand(id));
    realized.push_back(d);
  }
  for (const auto& d : realized) CHECK(d == realized[0]);
}

TEST_CASE("property: same seed gives identical metric series") {
  const auto sc = random_scenario(4, 3, 3);
  auto c = quick(300);
  c.latency.alpha = 1.0;
  c.shock = ShockProfile{50, 150, 0.2, 5};
  for (auto p : kAll) {
    const auto a = run_episode(sc, c, p, 5);
    const auto b = run_episode(sc, c, p, 5);
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t t = 0; t < a.metrics.size(); ++t) {
      CHECK(a.metrics[t].lambda == b.metrics[t].lambda);
      CHECK(a.metrics[t].p95_backlog == b.metrics[t].p95_backlog);
      CHECK(a.metrics[t].utilization == b.metrics[t].utilization);
      CHECK(a.metrics[t].blocked_capacity_ratio == b.metrics[t].blocked_capacity_ratio);
      CHECK(a.metrics[t].wct_partial == b.metrics[t].wct_partial);
    }
    CHECK(a.wct == b.wct);
  }
}

TEST_CASE("property: completion never beats the critical path") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto sc = random_scenario(1000 + seed, 1, 1 + seed % 4);
    std::vector<double> demand(sc.task_count());
    for (const auto& t : sc.workflows[0].tasks) demand[t.id] = t.nominal_demand;
    const double cp = critical_path_demand(sc.workflows[0], demand);
    const auto r = run_episode(sc, quick(100000), kAll[seed % 4], seed);
    REQUIRE(r.all_done);
    CHECK(r.workflows[0].completion_time() >= cp - 1e-9);
  }
}

TEST_CASE("property: live nodes with work hand out their whole capacity") {
  const auto sc = random_scenario(6, 4, 4);
  for (auto p : kAll) {
    const auto r = run_episode(sc, quick(5000), p, 6);
    for (const auto& m : r.metrics) {
      const double busy_nodes = m.utilization * 4.0;
      CHECK(std::abs(busy_nodes - std::round(busy_nodes)) < 1e-9);
      if (m.active_tasks > 0) CHECK(m.utilization > 0.0);
    }
  }
}

TEST_CASE("property: remaining work never grows without arrivals") {
  const auto sc = random_scenario(7, 3, 2);
  auto c = quick(2000);
  c.latency.alpha = 0.5;
  for (auto p : kAll) {
    Simulation sim(sc, c, p, 7);
    std::vector<double> last(sc.task_count(), INFINITY);
    while (!sim.finished() && sim.now() < c.horizon) {
      sim.step();
      for (TaskId id = 0; id < sc.task_count(); ++id) {
        const auto& s = sim.states()[id];
        CHECK(s.remaining_work <= last[id]);
        CHECK(s.remaining_work >= 0.0);
        last[id] = s.remaining_work;
      }
    }
  }
}

TEST_CASE("property: no task runs before its predecessors are done") {
  const auto sc = random_scenario(8, 3, 2);
  Simulation sim(sc, quick(2000), PolicyKind::qgars, 8);
  std::vector<const TaskSpec*> spec(sc.task_count());
  for (const auto& w : sc.workflows) {
    for (const auto& t : w.tasks) spec[t.id] = &t;
  }
  while (!sim.finished()) {
    sim.step();
    for (TaskId id = 0; id < sc.task_count(); ++id) {
      const auto st = sim.states()[id].status;
      if (st == TaskStatus::running || st == TaskStatus::done) {
        for (TaskId p : spec[id]->predecessors) CHECK(sim.states()[p].status == TaskStatus::done);
      }
    }
  }
}

TEST_CASE("property: capacity is blocked only during the shock") {
  const auto sc = random_scenario(9, 6, 3);
  auto c = quick(600);
  c.shock = ShockProfile{100, 200, 0.3, 5};
  for (auto p : kAll) {
    const auto r = run_episode(sc, c, p, 9);
    for (const auto& m : r.metrics) {
      if (!c.shock->active(m.epoch)) CHECK(m.blocked_capacity_ratio < 1e-12);
    }
  }
}

TEST_CASE("property: trust weight stays in [0, 1] and fixed policies report their endpoint") {
  const auto sc = random_scenario(10, 3, 2);
  auto c = quick(1000);
  c.latency.alpha = 1.0;
  c.shock = ShockProfile{20, 200, 0.2, 5};
  for (const auto& m : run_episode(sc, c, PolicyKind::qgars, 1).metrics) {
    CHECK(m.lambda >= 0.0);
    CHECK(m.lambda <= 1.0);
    CHECK(m.loss_q >= 0.0);
    CHECK(m.loss_q <= 1.0);
    CHECK(m.loss_b >= 0.0);
    CHECK(m.loss_b <= 1.0);
  }
  for (const auto& m : run_episode(sc, c, PolicyKind::static_prior, 1).metrics) CHECK(m.lambda == 1.0);
  for (const auto& m : run_episode(sc, c, PolicyKind::robust, 1).metrics) CHECK(m.lambda == 0.0);
}

TEST_CASE("Poisson arrivals add work") {
  const auto sc = single_task(3.0, 1.0);
  auto c = quick(1000);
  c.arrival_rate = 0.5;
  const auto r = run_episode(sc, c, PolicyKind::robust, 3);
  CHECK(r.all_done);
  CHECK(r.workflows[0].completion >= 3);
}

TEST_CASE("nearest-rank percentile") {
  CHECK(nearest_rank({}, 95) == 0.0);
  CHECK(nearest_rank({5}, 95) == 5.0);
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  CHECK(nearest_rank(v, 95) == 95.0);
  CHECK(nearest_rank(v, 50) == 50.0);
  CHECK(nearest_rank(v, 100) == 100.0);
  CHECK(nearest_rank({1, 2, 3}, 50) == 2.0);
}
