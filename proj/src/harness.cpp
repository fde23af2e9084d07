#include "qgars/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace qgars {

const char* to_string(Phase p) {
  switch (p) {
    case Phase::prior_gain: return "prior_gain";
    case Phase::volatility: return "volatility";
    case Phase::shock: return "shock";
  }
  return "?";
}

Phase parse_phase(const std::string& name) {
  if (name == "prior_gain" || name == "1") return Phase::prior_gain;
  if (name == "volatility" || name == "2") return Phase::volatility;
  if (name == "shock" || name == "3") return Phase::shock;
  throw ConfigError("unknown phase '" + name + "'");
}

ExperimentConfig ExperimentConfig::defaults(Phase phase) {
  ExperimentConfig c;
  c.phase = phase;
  c.sim.scheduler.prior.anneal = SimConfig::in_loop_anneal();
  c.sim.scheduler.prior.k_max = 8;
  c.sim.scheduler.prior.weights.gamma = 2.0;
  c.workload.count = 1;
  switch (phase) {
    case Phase::prior_gain:
      c.runs = 1000;
      c.policies = {PolicyKind::static_prior, PolicyKind::srpt_pred};
      c.sim.horizon = 100000;
      c.sim.prediction_sigma = 0.0;
      break;
    case Phase::volatility:
      c.runs = 200;
      c.alpha_grid = {0.0, 0.25, 0.5, 1.0, 1.5};
      c.policies = {PolicyKind::qgars, PolicyKind::static_prior, PolicyKind::robust};
      c.sim.horizon = 5000;
      break;
    case Phase::shock:
      c.runs = 128;
      c.policies = {PolicyKind::qgars, PolicyKind::static_prior, PolicyKind::robust,
                    PolicyKind::srpt_pred};
      c.sim.horizon = 1500;
      c.load = 0.35;
      c.sim.shock = ShockProfile{300, 900, 0.1, 10.0};
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (runs < 1) throw ConfigError("experiment: runs must be >= 1");
  if (nodes < 1) throw ConfigError("experiment: need at least one node");
  if (capacity_dims < 1 || capacity_dims > 8) {
    throw ConfigError("experiment: capacity_dims must lie in [1, 8]");
  }
  if (!(load >= 0.0)) throw ConfigError("experiment: load must be >= 0");
  if (policies.empty()) throw ConfigError("experiment: policy list is empty");
  for (std::size_t i = 0; i < policies.size(); ++i) {
    for (std::size_t j = i + 1; j < policies.size(); ++j) {
      if (policies[i] == policies[j]) throw ConfigError("experiment: duplicate policy");
    }
  }
  WorkloadParams w = workload;
  w.compute_nodes = nodes;
  w.validate();
  try {
    sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  switch (phase) {
    case Phase::prior_gain: {
      const bool has_ref = std::count(policies.begin(), policies.end(), PolicyKind::srpt_pred);
      if (policies.size() != 2 || !has_ref) {
        throw ConfigError("prior_gain: policies must be srpt_pred plus one candidate");
      }
      break;
    }
    case Phase::volatility:
      if (alpha_grid.empty()) throw ConfigError("volatility: alpha_grid is empty");
      for (double a : alpha_grid) {
        if (!(a >= 0.0)) throw ConfigError("volatility: alpha values must be >= 0");
      }
      break;
    case Phase::shock:
      if (sim.shock && sim.horizon <= sim.shock->end) {
        throw ConfigError("shock: horizon must exceed the shock end");
      }
      break;
  }
}

std::uint64_t episode_seed(const ExperimentConfig& config, std::size_t run_id) {
  return derive_seed(config.master_seed, {kEpisode, run_id});
}

namespace {

double mean_log_uniform(std::pair<double, double> r) {
  if (r.first == r.second) return r.first;
  return (r.second - r.first) / std::log(r.second / r.first);
}

}  // namespace

Scenario build_scenario(const ExperimentConfig& config, std::size_t run_id) {
  const std::uint64_t seed = derive_seed(config.master_seed, {kWorkload, run_id});
  Scenario sc;
  sc.nodes = make_nodes(config.nodes, config.capacity_dims, seed);
  WorkloadParams wp = config.workload;
  wp.compute_nodes = config.nodes;
  if (config.load <= 0.0) {
    sc.workflows = generate_workload(wp, seed);
    return sc;
  }

  const double mean_tasks = 0.5 * (wp.node_range.first + wp.node_range.second);
  const double mean_work = mean_tasks * mean_log_uniform(wp.demand_range);
  const double rate = config.load * static_cast<double>(config.nodes) / mean_work;
  const double horizon = static_cast<double>(config.sim.horizon);
  wp.count = static_cast<std::size_t>(std::ceil(2.0 * rate * horizon)) + 16;
  auto pool = generate_workload(wp, seed);

  // Workflow ids are assigned in generation order, so any prefix of the pool
  // keeps task ids dense.
  Rng rng(derive_seed(seed, {kRelease}));
  std::exponential_distribution<double> gap(rate);
  double t = 0.0;
  for (auto& w : pool) {
    t += gap(rng);
    if (t >= horizon) break;
    w.release_epoch = static_cast<Epoch>(t);
    sc.workflows.push_back(std::move(w));
  }
  return sc;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

ImprovementStats improvement_stats(const std::vector<double>& imp) {
  ImprovementStats s;
  if (imp.empty()) return s;
  s.mean = std::accumulate(imp.begin(), imp.end(), 0.0) / static_cast<double>(imp.size());
  s.min = *std::min_element(imp.begin(), imp.end());
  s.max = *std::max_element(imp.begin(), imp.end());
  s.p50 = nearest_rank(imp, 50);
  s.p95 = nearest_rank(imp, 95);
  const auto worse = std::count_if(imp.begin(), imp.end(), [](double x) { return x < -0.01; });
  s.worse_than_1pct = static_cast<double>(worse) / static_cast<double>(imp.size());
  return s;
}

Phase1Result run_phase1(const ExperimentConfig& config) {
  config.validate();
  const PolicyKind candidate =
      config.policies[0] == PolicyKind::srpt_pred ? config.policies[1] : config.policies[0];
  Phase1Result out;
  out.rows.resize(config.runs);
  parallel_for(config.runs, config.threads, [&](std::size_t r) {
    const Scenario sc = build_scenario(config, r);
    const auto seed = episode_seed(config, r);
    const double q = run_episode(sc, config.sim, candidate, seed).wct;
    const double s = run_episode(sc, config.sim, PolicyKind::srpt_pred, seed).wct;
    out.rows[r] = {r, q, s, s > 0.0 ? (s - q) / s : 0.0};
  });
  std::vector<double> imp;
  for (const auto& row : out.rows) {
    imp.push_back(row.improvement);
    out.mean_wct_qgars += row.wct_qgars;
    out.mean_wct_srpt += row.wct_srpt;
  }
  out.mean_wct_qgars /= static_cast<double>(config.runs);
  out.mean_wct_srpt /= static_cast<double>(config.runs);
  out.improvement = improvement_stats(imp);
  return out;
}

Phase2Result run_phase2(const ExperimentConfig& config) {
  config.validate();
  const std::size_t na = config.alpha_grid.size();
  const std::size_t np = config.policies.size();
  Phase2Result out;
  out.policies = config.policies;
  out.rows.resize(na * config.runs);
  std::vector<std::vector<CompletionRow>> completions(na * config.runs);

  parallel_for(na * config.runs, config.threads, [&](std::size_t k) {
    const std::size_t a = k / config.runs;
    const std::size_t r = k % config.runs;
    SimConfig sim = config.sim;
    sim.latency.alpha = config.alpha_grid[a];
    const Scenario sc = build_scenario(config, r);
    const auto seed = episode_seed(config, r);
    Phase2Row row;
    row.alpha = sim.latency.alpha;
    row.run_id = r;
    for (auto p : config.policies) {
      const auto ep = run_episode(sc, sim, p, seed);
      row.wct.push_back(ep.wct);
      if (p == PolicyKind::qgars) row.final_lambda = ep.trust.lambda;
      for (const auto& w : ep.workflows) {
        completions[k].push_back({row.alpha, r, w.id, p, w.completion_time(), w.censored});
      }
    }
    out.rows[k] = std::move(row);
  });
  for (auto& c : completions) {
    out.completions.insert(out.completions.end(), c.begin(), c.end());
  }

  for (std::size_t a = 0; a < na; ++a) {
    AlphaSummary s;
    s.alpha = config.alpha_grid[a];
    for (std::size_t p = 0; p < np; ++p) {
      std::vector<double> wct, ct;
      for (std::size_t r = 0; r < config.runs; ++r) wct.push_back(out.rows[a * config.runs + r].wct[p]);
      for (const auto& c : out.completions) {
        if (c.alpha == s.alpha && c.policy == config.policies[p]) ct.push_back(c.completion_time);
      }
      PolicyWctStats st;
      st.policy = config.policies[p];
      st.mean_wct = std::accumulate(wct.begin(), wct.end(), 0.0) / static_cast<double>(wct.size());
      st.p50_wct = nearest_rank(wct, 50);
      st.p95_wct = nearest_rank(wct, 95);
      st.p99_completion = nearest_rank(ct, 99);
      s.policies.push_back(st);
    }
    for (std::size_t r = 0; r < config.runs; ++r) s.mean_final_lambda += out.rows[a * config.runs + r].final_lambda;
    s.mean_final_lambda /= static_cast<double>(config.runs);
    out.by_alpha.push_back(std::move(s));
  }
  return out;
}

double window_mean(const std::vector<double>& v, Epoch from, Epoch to) {
  from = std::max<Epoch>(from, 0);
  to = std::min<Epoch>(to, static_cast<Epoch>(v.size()));
  if (to <= from) return 0.0;
  double s = 0.0;
  for (Epoch t = from; t < to; ++t) s += v[static_cast<std::size_t>(t)];
  return s / static_cast<double>(to - from);
}

const PolicySeries* Phase3Result::find(PolicyKind p) const {
  for (const auto& s : series) {
    if (s.policy == p) return &s;
  }
  return nullptr;
}

namespace {

struct RunSeries {
  std::vector<double> lambda, p95, blocked, util;
  double wct = 0.0;
  std::size_t workflows = 0;
  std::size_t censored = 0;
};

RunSeries padded_series(const EpisodeResult& ep, Epoch horizon) {
  const auto h = static_cast<std::size_t>(horizon);
  RunSeries s;
  s.lambda.assign(h, ep.policy == PolicyKind::qgars ? ep.trust.lambda
                                                     : (ep.policy == PolicyKind::static_prior ? 1.0 : 0.0));
  s.p95.assign(h, 0.0);
  s.blocked.assign(h, 0.0);
  s.util.assign(h, 0.0);
  for (const auto& m : ep.metrics) {
    const auto t = static_cast<std::size_t>(m.epoch);
    s.lambda[t] = m.lambda;
    s.p95[t] = m.p95_backlog;
    s.blocked[t] = m.blocked_capacity_ratio;
    s.util[t] = m.utilization;
  }
  s.wct = ep.wct;
  s.workflows = ep.workflows.size();
  s.censored = static_cast<std::size_t>(
      std::count_if(ep.workflows.begin(), ep.workflows.end(), [](const auto& w) { return w.censored; }));
  return s;
}

}  // namespace

Phase3Result run_phase3(const ExperimentConfig& config) {
  config.validate();
  const std::size_t np = config.policies.size();
  const Epoch horizon = config.sim.horizon;
  const auto h = static_cast<std::size_t>(horizon);

  std::vector<std::vector<RunSeries>> runs(config.runs);
  parallel_for(config.runs, config.threads, [&](std::size_t r) {
    const Scenario sc = build_scenario(config, r);
    const auto seed = episode_seed(config, r);
    for (auto p : config.policies) runs[r].push_back(padded_series(run_episode(sc, config.sim, p, seed), horizon));
  });

  Phase3Result out;
  out.horizon = horizon;
  out.shock = config.sim.shock;
  const double n = static_cast<double>(config.runs);
  for (std::size_t p = 0; p < np; ++p) {
    PolicySeries s;
    s.policy = config.policies[p];
    s.lambda.assign(h, 0.0);
    s.p95_backlog.assign(h, 0.0);
    s.blocked.assign(h, 0.0);
    s.utilization.assign(h, 0.0);
    for (std::size_t r = 0; r < config.runs; ++r) {
      const auto& rs = runs[r][p];
      for (std::size_t t = 0; t < h; ++t) {
        s.lambda[t] += rs.lambda[t];
        s.p95_backlog[t] += rs.p95[t];
        s.blocked[t] += rs.blocked[t];
        s.utilization[t] += rs.util[t];
      }
      Phase3Row row;
      row.run_id = r;
      row.policy = s.policy;
      row.wct = rs.wct;
      row.mean_utilization = std::accumulate(rs.util.begin(), rs.util.end(), 0.0) / static_cast<double>(h);
      row.peak_p95 = *std::max_element(rs.p95.begin(), rs.p95.end());
      row.workflows = rs.workflows;
      row.censored = rs.censored;
      s.mean_wct += rs.wct;
      out.rows.push_back(row);
    }
    for (std::size_t t = 0; t < h; ++t) {
      s.lambda[t] /= n;
      s.p95_backlog[t] /= n;
      s.blocked[t] /= n;
      s.utilization[t] /= n;
    }
    s.mean_wct /= n;
    s.peak_p95 = *std::max_element(s.p95_backlog.begin(), s.p95_backlog.end());
    s.mean_utilization = window_mean(s.utilization, 0, horizon);
    if (config.sim.shock) {
      for (Epoch t = config.sim.shock->end; t < horizon; ++t) {
        if (s.blocked[static_cast<std::size_t>(t)] < 0.01) {
          s.blocked_recovery = t;
          break;
        }
      }
    }
    out.series.push_back(std::move(s));
  }
  // Runs were appended policy by policy; order them by run for the CSV.
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const Phase3Row& a, const Phase3Row& b) { return a.run_id < b.run_id; });

  if (const auto* q = out.find(PolicyKind::qgars)) {
    const Epoch start = config.sim.shock ? config.sim.shock->start : horizon;
    const Epoch end = config.sim.shock ? config.sim.shock->end : horizon;
    out.lambda_before = window_mean(q->lambda, 0, start);
    out.lambda_during = window_mean(q->lambda, start, end);
    out.lambda_after = window_mean(q->lambda, end, horizon);
  }
  return out;
}

AggregateResult run_experiment(const ExperimentConfig& config) {
  switch (config.phase) {
    case Phase::prior_gain: return run_phase1(config);
    case Phase::volatility: return run_phase2(config);
    case Phase::shock: return run_phase3(config);
  }
  throw ConfigError("unknown phase");
}

// ---------------------------------------------------------------------------
// Emission

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string phase1_csv(const Phase1Result& r) {
  std::string s = "run_id,wct_qgars,wct_srpt,improvement\n";
  for (const auto& row : r.rows) {
    s += std::to_string(row.run_id) + "," + num(row.wct_qgars) + "," + num(row.wct_srpt) + "," +
         num(row.improvement) + "\n";
  }
  return s;
}

std::string phase2_csv(const Phase2Result& r) {
  std::string s = "alpha,run_id";
  for (auto p : r.policies) s += std::string(",wct_") + to_string(p);
  s += ",final_lambda\n";
  for (const auto& row : r.rows) {
    s += num(row.alpha) + "," + std::to_string(row.run_id);
    for (double w : row.wct) s += "," + num(w);
    s += "," + num(row.final_lambda) + "\n";
  }
  return s;
}

std::string phase2_completion_csv(const Phase2Result& r) {
  std::string s = "alpha,run_id,workflow,policy,completion_time,censored\n";
  for (const auto& c : r.completions) {
    s += num(c.alpha) + "," + std::to_string(c.run_id) + "," + std::to_string(c.workflow) + "," +
         to_string(c.policy) + "," + num(c.completion_time) + "," + (c.censored ? "1" : "0") + "\n";
  }
  return s;
}

std::string phase3_series_csv(const Phase3Result& r) {
  std::string s = "epoch,shock";
  for (const auto& ps : r.series) {
    const std::string n = to_string(ps.policy);
    s += ",lambda_" + n + ",p95_backlog_" + n + ",blocked_" + n + ",utilization_" + n;
  }
  s += "\n";
  for (Epoch t = 0; t < r.horizon && !r.series.empty(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    s += std::to_string(t) + "," + ((r.shock && r.shock->active(t)) ? "1" : "0");
    for (const auto& ps : r.series) {
      s += "," + num(ps.lambda[i]) + "," + num(ps.p95_backlog[i]) + "," + num(ps.blocked[i]) + "," +
           num(ps.utilization[i]);
    }
    s += "\n";
  }
  return s;
}

std::string phase3_runs_csv(const Phase3Result& r) {
  std::string s = "run_id,policy,wct,mean_utilization,peak_p95_backlog,workflows,censored\n";
  for (const auto& row : r.rows) {
    s += std::to_string(row.run_id) + "," + to_string(row.policy) + "," + num(row.wct) + "," +
         num(row.mean_utilization) + "," + num(row.peak_p95) + "," + std::to_string(row.workflows) +
         "," + std::to_string(row.censored) + "\n";
  }
  return s;
}

std::string summary_json(const AggregateResult& result, const ExperimentConfig& config) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  j["phase"] = to_string(config.phase);
  j["config"] = ojson::parse(config_to_json_text(config));
  if (const auto* r1 = std::get_if<Phase1Result>(&result)) {
    const auto& s = r1->improvement;
    j["runs"] = r1->rows.size();
    j["mean_wct_qgars"] = r1->mean_wct_qgars;
    j["mean_wct_srpt"] = r1->mean_wct_srpt;
    j["improvement"] = {{"mean", s.mean}, {"min", s.min}, {"max", s.max},  {"p50", s.p50},
                        {"p95", s.p95},   {"worse_than_1pct", s.worse_than_1pct}};
  } else if (const auto* r2 = std::get_if<Phase2Result>(&result)) {
    j["by_alpha"] = ojson::array();
    for (const auto& a : r2->by_alpha) {
      ojson aj;
      aj["alpha"] = a.alpha;
      aj["mean_final_lambda"] = a.mean_final_lambda;
      for (const auto& p : a.policies) {
        aj[to_string(p.policy)] = {{"mean_wct", p.mean_wct},
                                   {"p50_wct", p.p50_wct},
                                   {"p95_wct", p.p95_wct},
                                   {"p99_completion", p.p99_completion}};
      }
      j["by_alpha"].push_back(std::move(aj));
    }
  } else {
    const auto& r3 = std::get<Phase3Result>(result);
    j["lambda"] = {{"before_shock", r3.lambda_before},
                   {"during_shock", r3.lambda_during},
                   {"after_shock", r3.lambda_after}};
    for (const auto& s : r3.series) {
      j["policies"][to_string(s.policy)] = {{"mean_wct", s.mean_wct},
                                            {"peak_p95_backlog", s.peak_p95},
                                            {"blocked_recovery_epoch", s.blocked_recovery},
                                            {"mean_utilization", s.mean_utilization}};
    }
  }
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit(const AggregateResult& result,
                                        const ExperimentConfig& config,
                                        const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::pair<std::string, std::string>> files;
  if (const auto* r1 = std::get_if<Phase1Result>(&result)) {
    files.emplace_back("phase1_runs.csv", phase1_csv(*r1));
  } else if (const auto* r2 = std::get_if<Phase2Result>(&result)) {
    files.emplace_back("phase2_runs.csv", phase2_csv(*r2));
    files.emplace_back("phase2_completion.csv", phase2_completion_csv(*r2));
  } else {
    const auto& r3 = std::get<Phase3Result>(result);
    files.emplace_back("phase3_series.csv", phase3_series_csv(r3));
    files.emplace_back("phase3_runs.csv", phase3_runs_csv(r3));
  }
  files.emplace_back("summary.json", summary_json(result, config));

  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : files) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace qgars
