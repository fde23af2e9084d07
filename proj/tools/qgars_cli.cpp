// Command-line front end: single QUBO solves, one-episode traces, the three
// experiment phases and annealer timing.

#include "qgars/harness.hpp"
#include "qgars/qubo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

using namespace qgars;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> threads;
};

std::uint64_t resolve_seed(const Globals& g, std::uint64_t fallback) {
  if (g.seed) return *g.seed;
  if (auto env = seed_from_environment()) return *env;
  return fallback;
}

ExperimentConfig resolve_config(const Globals& g, std::optional<Phase> phase) {
  ExperimentConfig c;
  if (!g.config_path.empty()) {
    c = load_config(g.config_path);
    if (phase && *phase != c.phase) throw ConfigError("--phase disagrees with the config file");
  } else {
    c = ExperimentConfig::defaults(phase.value_or(Phase::shock));
  }
  c.master_seed = resolve_seed(g, c.master_seed);
  if (g.runs) c.runs = *g.runs;
  if (g.threads) c.threads = *g.threads;
  if (!g.out.empty()) c.output_path = g.out;
  c.validate();
  return c;
}

ojson result_json(const SolveResult& r) {
  ojson j;
  j["k"] = r.assignment.k();
  j["order"] = r.assignment.order;
  j["ranks"] = r.assignment.ranks();
  j["energy"] = r.energy;
  j["raw_energy"] = r.raw_energy;
  j["initial_energy"] = r.initial_energy;
  j["sweeps_used"] = r.sweeps_used;
  j["elapsed_us"] = r.elapsed.count();
  j["feasible_at_readout"] = r.feasible_at_readout;
  return j;
}

QuboInstance random_instance(int k, double beta, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<WindowEntry> w;
  for (int i = 0; i < k; ++i) w.push_back({static_cast<TaskId>(i), u(rng)});
  return QuboInstance::build(w, beta);
}

int cmd_solve(const Globals& g, const std::string& instance_path, int random_k, double beta,
              const std::string& solver, const AnnealConfig& base, const std::string& dump_path) {
  const std::uint64_t seed = resolve_seed(g, base.seed);
  QuboInstance qubo = [&] {
    if (!instance_path.empty()) {
      std::ifstream in(instance_path);
      if (!in) throw ConfigError("cannot open " + instance_path);
      return load(in);
    }
    if (random_k < 1) throw ConfigError("solve: pass --instance or --random K");
    return random_instance(random_k, beta, seed);
  }();
  if (!dump_path.empty()) {
    std::ofstream out(dump_path);
    dump(qubo, out);
    if (!out) throw std::runtime_error("cannot write " + dump_path);
  }
  AnnealConfig cfg = base;
  cfg.seed = seed;
  SolveResult r;
  if (solver == "sqa") {
    r = solve_sqa(qubo, cfg);
  } else if (solver == "sa") {
    r = solve_sa(qubo, cfg);
  } else {
    r = solve_exhaustive(qubo);
  }
  ojson j = result_json(r);
  j["solver"] = solver;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& scenario_path, const std::string& policy_name,
                 std::size_t run_id, bool trace) {
  ExperimentConfig c = resolve_config(g, std::nullopt);
  const Scenario sc = scenario_path.empty() ? build_scenario(c, run_id) : load_scenario(scenario_path);
  const PolicyKind policy = parse_policy(policy_name);
  const auto ep = run_episode(sc, c.sim, policy, episode_seed(c, run_id));

  if (trace) {
    std::filesystem::create_directories(c.output_path);
    const auto path = std::filesystem::path(c.output_path) / "trace.jsonl";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    double cum_q = 0.0, cum_b = 0.0;
    for (const auto& m : ep.metrics) {
      cum_q += m.loss_q;
      cum_b += m.loss_b;
      ojson j;
      j["epoch"] = m.epoch;
      j["lambda"] = m.lambda;
      j["loss_q"] = m.loss_q;
      j["loss_b"] = m.loss_b;
      j["cum_loss_q"] = cum_q;
      j["cum_loss_b"] = cum_b;
      j["wct_partial"] = m.wct_partial;
      j["p95_backlog"] = m.p95_backlog;
      j["blocked_capacity_ratio"] = m.blocked_capacity_ratio;
      j["utilization"] = m.utilization;
      j["active_tasks"] = m.active_tasks;
      j["failed_nodes"] = m.failed_nodes;
      out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }
  ojson j;
  j["policy"] = to_string(policy);
  j["wct"] = ep.wct;
  j["all_done"] = ep.all_done;
  j["epochs_run"] = ep.epochs_run;
  j["workflows"] = ep.workflows.size();
  j["final_lambda"] = ep.trust.lambda;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_experiment(const Globals& g, const std::string& phase_name) {
  const ExperimentConfig c = resolve_config(g, parse_phase(phase_name));
  const auto result = run_experiment(c);
  for (const auto& p : emit(result, c, c.output_path)) std::cout << p.string() << "\n";
  std::cout << summary_json(result, c);
  return 0;
}

// Above this size the full schedule takes seconds per solve, so its latency is
// extrapolated from a two-sweep single-read probe.
constexpr int kBenchFullMaxK = 32;

double full_schedule_us(const QuboInstance& q, bool& estimated) {
  AnnealConfig full = AnnealConfig::unlimited();
  estimated = q.k() > kBenchFullMaxK;
  if (!estimated) return static_cast<double>(solve_sqa(q, full).elapsed.count());
  AnnealConfig probe = full;
  probe.sweeps = 2;
  probe.reads = 1;
  const auto r = solve_sqa(q, probe);
  return static_cast<double>(r.elapsed.count()) / r.sweeps_used * full.sweeps * full.reads;
}

int cmd_bench(const Globals& g, std::vector<int> ks, int reps) {
  const std::uint64_t seed = resolve_seed(g, 7);
  std::printf("%5s %14s %14s %12s %14s\n", "K", "full_med_us", "inloop_med_us", "capped_us",
              "capped_sweeps");
  for (int k : ks) {
    std::vector<double> full, light, capped, capped_sweeps;
    bool estimated = false;
    for (int r = 0; r < reps; ++r) {
      const auto q = random_instance(k, 1.0, derive_seed(seed, {static_cast<std::uint64_t>(k),
                                                                static_cast<std::uint64_t>(r)}));
      full.push_back(full_schedule_us(q, estimated));
      light.push_back(static_cast<double>(solve_sqa(q, SimConfig::in_loop_anneal()).elapsed.count()));
      const auto c = solve_sqa(q, AnnealConfig{});
      capped.push_back(static_cast<double>(c.elapsed.count()));
      capped_sweeps.push_back(c.sweeps_used);
    }
    std::printf("%5d %13.0f%s %14.0f %12.0f %14.0f\n", k, nearest_rank(full, 50), estimated ? "*" : " ",
                nearest_rank(light, 50), nearest_rank(capped, 50), nearest_rank(capped_sweeps, 50));
  }
  std::printf("* extrapolated from a two-sweep probe\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-QUBO scheduling simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed (overrides QGARS_SEED and the config)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--runs", g.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  auto* solve = app.add_subcommand("solve", "Solve one rank QUBO and print the result as JSON");
  std::string instance_path, solver = "sqa", dump_path;
  int random_k = 0;
  double beta = 1.0;
  AnnealConfig anneal;
  std::int64_t budget_us = anneal.time_budget.count();
  solve->add_option("--instance", instance_path, "Instance file written by --dump")->check(CLI::ExistingFile);
  solve->add_option("--random", random_k, "Random instance of size K (backlogs uniform in [0, 10])");
  solve->add_option("--beta", beta, "Interference decay for --random");
  solve->add_option("--solver", solver)->check(CLI::IsMember({"sqa", "sa", "exhaustive"}));
  solve->add_option("--slices", anneal.trotter_slices);
  solve->add_option("--sweeps", anneal.sweeps);
  solve->add_option("--reads", anneal.reads);
  solve->add_option("--temperature", anneal.temperature);
  solve->add_option("--budget-us", budget_us, "Wall-clock cap; 0 disables it");
  solve->add_option("--dump", dump_path, "Also write the instance to this file");

  auto* simulate = app.add_subcommand("simulate", "Run one episode");
  std::string scenario_path, policy_name = "qgars";
  std::size_t run_id = 0;
  bool trace = false;
  simulate->add_option("--scenario", scenario_path, "Scenario JSON (default: generated)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--policy", policy_name)
      ->check(CLI::IsMember({"qgars", "static_prior", "robust", "srpt_pred"}));
  simulate->add_option("--run", run_id, "Run index of the generated scenario");
  simulate->add_flag("--trace", trace, "Write per-epoch trace.jsonl into --out");

  auto* experiment = app.add_subcommand("experiment", "Run an experiment phase");
  std::string phase_name;
  experiment->add_option("--phase", phase_name, "1, 2 or 3")->required();

  auto* bench = app.add_subcommand("bench", "Annealer latency at several window sizes");
  std::vector<int> ks{8, 16, 32, 64, 100};
  int reps = 11;
  bench->add_option("--k", ks, "Window sizes");
  bench->add_option("--reps", reps, "Instances per size")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      anneal.time_budget = budget_us > 0 ? std::chrono::microseconds(budget_us)
                                         : std::chrono::microseconds::max();
      return cmd_solve(g, instance_path, random_k, beta, solver, anneal, dump_path);
    }
    if (*simulate) return cmd_simulate(g, scenario_path, policy_name, run_id, trace);
    if (*experiment) return cmd_experiment(g, phase_name);
    if (*bench) return cmd_bench(g, ks, reps);
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
