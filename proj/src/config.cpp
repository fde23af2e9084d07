#include "qgars/harness.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace qgars {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_text(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void reject_unknown(const json& j, const std::string& where, std::set<std::string> known) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_range(const json& j, const char* key, std::pair<int, int>& out, const std::string& where) {
  if (!j.contains(key)) return;
  std::vector<int> v;
  read(j, key, v, where);
  if (v.size() != 2) throw ConfigError(where + "." + key + ": expected [lo, hi]");
  out = {v[0], v[1]};
}

void read_range(const json& j, const char* key, std::pair<double, double>& out,
                const std::string& where) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  read(j, key, v, where);
  if (v.size() != 2) throw ConfigError(where + "." + key + ": expected [lo, hi]");
  out = {v[0], v[1]};
}

const char* to_string(BacklogModel m) {
  return m == BacklogModel::remaining ? "remaining" : "downstream";
}

BacklogModel parse_backlog(const std::string& s) {
  if (s == "remaining") return BacklogModel::remaining;
  if (s == "downstream") return BacklogModel::downstream;
  throw ConfigError("unknown backlog model '" + s + "'");
}

void read_anneal(const json& j, AnnealConfig& a) {
  const std::string where = "scheduler.anneal";
  require_object(j, where);
  reject_unknown(j, where, {"trotter_slices", "sweeps", "gamma_initial", "gamma_final",
                            "temperature", "reads", "time_budget_us", "seed"});
  read(j, "trotter_slices", a.trotter_slices, where);
  read(j, "sweeps", a.sweeps, where);
  read(j, "gamma_initial", a.gamma_initial, where);
  read(j, "gamma_final", a.gamma_final, where);
  read(j, "temperature", a.temperature, where);
  read(j, "reads", a.reads, where);
  read(j, "seed", a.seed, where);
  if (j.contains("time_budget_us")) {
    if (j["time_budget_us"].is_null()) {
      a.time_budget = std::chrono::microseconds::max();
    } else {
      std::int64_t us = 0;
      read(j, "time_budget_us", us, where);
      a.time_budget = std::chrono::microseconds(us);
    }
  }
}

ojson anneal_json(const AnnealConfig& a) {
  ojson j;
  j["trotter_slices"] = a.trotter_slices;
  j["sweeps"] = a.sweeps;
  j["gamma_initial"] = a.gamma_initial;
  j["gamma_final"] = a.gamma_final;
  j["temperature"] = a.temperature;
  j["reads"] = a.reads;
  if (a.time_budget == std::chrono::microseconds::max()) {
    j["time_budget_us"] = nullptr;
  } else {
    j["time_budget_us"] = a.time_budget.count();
  }
  j["seed"] = a.seed;
  return j;
}

void read_scheduler(const json& j, SchedulerConfig& s) {
  const std::string where = "scheduler";
  require_object(j, where);
  reject_unknown(j, where, {"k_max", "beta", "gamma", "epsilon", "prior_input", "anneal",
                            "initial_lambda", "eta", "eta_horizon", "lambda_floor",
                            "srpt_use_predictions"});
  read(j, "k_max", s.prior.k_max, where);
  read(j, "beta", s.prior.beta, where);
  read(j, "gamma", s.prior.weights.gamma, where);
  read(j, "epsilon", s.prior.weights.epsilon, where);
  if (j.contains("prior_input")) {
    std::string v;
    read(j, "prior_input", v, where);
    if (v == "predicted") {
      s.prior.input = PriorInput::predicted;
    } else if (v == "observed") {
      s.prior.input = PriorInput::observed;
    } else {
      throw ConfigError("scheduler.prior_input: expected predicted or observed");
    }
  }
  if (j.contains("anneal")) read_anneal(j["anneal"], s.prior.anneal);
  read(j, "initial_lambda", s.initial_lambda, where);
  read(j, "eta", s.eta, where);
  read(j, "eta_horizon", s.eta_horizon, where);
  read(j, "lambda_floor", s.lambda_floor, where);
  read(j, "srpt_use_predictions", s.srpt_use_predictions, where);
}

void read_shock(const json& j, std::optional<ShockProfile>& shock) {
  if (j.is_null()) {
    shock.reset();
    return;
  }
  const std::string where = "shock";
  require_object(j, where);
  reject_unknown(j, where, {"start", "end", "node_fail_prob", "prediction_noise_factor"});
  ShockProfile s = shock.value_or(ShockProfile{});
  read(j, "start", s.start, where);
  read(j, "end", s.end, where);
  read(j, "node_fail_prob", s.node_fail_prob, where);
  read(j, "prediction_noise_factor", s.prediction_noise_factor, where);
  shock = s;
}

void read_latency(const json& j, LatencyModel& m) {
  const std::string where = "latency";
  require_object(j, where);
  reject_unknown(j, where, {"alpha", "tail_prob_coeff", "tail_prob_cap", "tail_shape"});
  read(j, "alpha", m.alpha, where);
  read(j, "tail_prob_coeff", m.tail_prob_coeff, where);
  read(j, "tail_prob_cap", m.tail_prob_cap, where);
  read(j, "tail_shape", m.tail_shape, where);
}

void read_workload(const json& j, WorkloadParams& w) {
  const std::string where = "workload";
  require_object(j, where);
  reject_unknown(j, where, {"workflows", "tasks", "width", "sla", "demand"});
  read(j, "workflows", w.count, where);
  read_range(j, "tasks", w.node_range, where);
  read_range(j, "width", w.width_range, where);
  read_range(j, "sla", w.sla_range, where);
  read_range(j, "demand", w.demand_range, where);
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  const json j = parse_text(text, "config");
  require_object(j, "config");
  reject_unknown(j, "config",
                 {"phase", "runs", "alpha_grid", "policies", "master_seed", "output_path",
                  "threads", "nodes", "capacity_dims", "workload", "load", "horizon", "shock",
                  "latency", "backlog", "prediction_sigma", "prediction_floor", "arrival_rate",
                  "service_rate", "scheduler"});
  if (!j.contains("phase")) throw ConfigError("config: 'phase' is required");
  std::string phase_name;
  if (j["phase"].is_number_integer()) {
    phase_name = std::to_string(j["phase"].get<int>());
  } else {
    read(j, "phase", phase_name, "config");
  }
  ExperimentConfig c = ExperimentConfig::defaults(parse_phase(phase_name));
  const std::string where = "config";
  read(j, "runs", c.runs, where);
  read(j, "alpha_grid", c.alpha_grid, where);
  if (j.contains("policies")) {
    std::vector<std::string> names;
    read(j, "policies", names, where);
    c.policies.clear();
    for (const auto& n : names) c.policies.push_back(parse_policy(n));
  }
  read(j, "master_seed", c.master_seed, where);
  read(j, "output_path", c.output_path, where);
  read(j, "threads", c.threads, where);
  read(j, "nodes", c.nodes, where);
  read(j, "capacity_dims", c.capacity_dims, where);
  if (j.contains("workload")) read_workload(j["workload"], c.workload);
  read(j, "load", c.load, where);
  read(j, "horizon", c.sim.horizon, where);
  if (j.contains("shock")) read_shock(j["shock"], c.sim.shock);
  if (j.contains("latency")) read_latency(j["latency"], c.sim.latency);
  if (j.contains("backlog")) {
    std::string b;
    read(j, "backlog", b, where);
    c.sim.backlog = parse_backlog(b);
  }
  read(j, "prediction_sigma", c.sim.prediction_sigma, where);
  read(j, "prediction_floor", c.sim.prediction_floor, where);
  read(j, "arrival_rate", c.sim.arrival_rate, where);
  read(j, "service_rate", c.sim.service_rate, where);
  if (j.contains("scheduler")) read_scheduler(j["scheduler"], c.sim.scheduler);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json_text(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_to_json_text(const ExperimentConfig& c) {
  ojson j;
  j["phase"] = to_string(c.phase);
  j["runs"] = c.runs;
  j["alpha_grid"] = c.alpha_grid;
  std::vector<std::string> pol;
  for (auto p : c.policies) pol.emplace_back(to_string(p));
  j["policies"] = pol;
  j["master_seed"] = c.master_seed;
  j["output_path"] = c.output_path;
  j["nodes"] = c.nodes;
  j["capacity_dims"] = c.capacity_dims;
  j["workload"] = {{"workflows", c.workload.count},
                   {"tasks", {c.workload.node_range.first, c.workload.node_range.second}},
                   {"width", {c.workload.width_range.first, c.workload.width_range.second}},
                   {"sla", {c.workload.sla_range.first, c.workload.sla_range.second}},
                   {"demand", {c.workload.demand_range.first, c.workload.demand_range.second}}};
  j["load"] = c.load;
  j["horizon"] = c.sim.horizon;
  if (c.sim.shock) {
    const auto& s = *c.sim.shock;
    j["shock"] = {{"start", s.start},
                  {"end", s.end},
                  {"node_fail_prob", s.node_fail_prob},
                  {"prediction_noise_factor", s.prediction_noise_factor}};
  } else {
    j["shock"] = nullptr;
  }
  const auto& l = c.sim.latency;
  j["latency"] = {{"alpha", l.alpha},
                  {"tail_prob_coeff", l.tail_prob_coeff},
                  {"tail_prob_cap", l.tail_prob_cap},
                  {"tail_shape", l.tail_shape}};
  j["backlog"] = to_string(c.sim.backlog);
  j["prediction_sigma"] = c.sim.prediction_sigma;
  j["prediction_floor"] = c.sim.prediction_floor;
  j["arrival_rate"] = c.sim.arrival_rate;
  j["service_rate"] = c.sim.service_rate;
  const auto& s = c.sim.scheduler;
  ojson sj;
  sj["k_max"] = s.prior.k_max;
  sj["beta"] = s.prior.beta;
  sj["gamma"] = s.prior.weights.gamma;
  sj["epsilon"] = s.prior.weights.epsilon;
  sj["prior_input"] = s.prior.input == PriorInput::predicted ? "predicted" : "observed";
  sj["anneal"] = anneal_json(s.prior.anneal);
  sj["initial_lambda"] = s.initial_lambda;
  sj["eta"] = s.eta;
  sj["eta_horizon"] = s.eta_horizon;
  sj["lambda_floor"] = s.lambda_floor;
  sj["srpt_use_predictions"] = s.srpt_use_predictions;
  j["scheduler"] = sj;
  return j.dump(2) + "\n";
}

Scenario scenario_from_json_text(const std::string& text) {
  const json j = parse_text(text, "scenario");
  require_object(j, "scenario");
  reject_unknown(j, "scenario", {"nodes", "workflows"});
  Scenario sc;
  try {
    for (const auto& n : j.at("nodes")) {
      reject_unknown(n, "scenario.nodes[]", {"id", "capacity"});
      ComputeNode node;
      node.id = n.at("id").get<NodeId>();
      const auto cap = n.at("capacity").get<std::vector<double>>();
      node.capacity = Eigen::Map<const Eigen::VectorXd>(cap.data(), static_cast<Eigen::Index>(cap.size()));
      sc.nodes.push_back(std::move(node));
    }
    for (const auto& w : j.at("workflows")) {
      reject_unknown(w, "scenario.workflows[]", {"id", "sla_weight", "release_epoch", "tasks"});
      WorkflowDag dag;
      dag.id = w.at("id").get<WorkflowId>();
      dag.sla_weight = w.value("sla_weight", 1.0);
      dag.release_epoch = w.value("release_epoch", Epoch{0});
      for (const auto& t : w.at("tasks")) {
        reject_unknown(t, "scenario.tasks[]", {"id", "node", "demand", "predecessors"});
        TaskSpec spec;
        spec.id = t.at("id").get<TaskId>();
        spec.workflow = dag.id;
        spec.assigned_node = t.at("node").get<NodeId>();
        spec.nominal_demand = t.at("demand").get<double>();
        spec.predecessors = t.value("predecessors", std::vector<TaskId>{});
        for (TaskId p : spec.predecessors) dag.edges.emplace_back(p, spec.id);
        dag.tasks.push_back(std::move(spec));
      }
      sc.workflows.push_back(std::move(dag));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  validate(sc);
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_json_text(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string scenario_to_json_text(const Scenario& sc) {
  ojson j;
  j["nodes"] = ojson::array();
  for (const auto& n : sc.nodes) {
    j["nodes"].push_back({{"id", n.id},
                          {"capacity", std::vector<double>(n.capacity.data(),
                                                           n.capacity.data() + n.capacity.size())}});
  }
  j["workflows"] = ojson::array();
  for (const auto& w : sc.workflows) {
    ojson wj;
    wj["id"] = w.id;
    wj["sla_weight"] = w.sla_weight;
    wj["release_epoch"] = w.release_epoch;
    wj["tasks"] = ojson::array();
    for (const auto& t : w.tasks) {
      wj["tasks"].push_back({{"id", t.id},
                             {"node", t.assigned_node},
                             {"demand", t.nominal_demand},
                             {"predecessors", t.predecessors}});
    }
    j["workflows"].push_back(std::move(wj));
  }
  return j.dump(2) + "\n";
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* v = std::getenv("QGARS_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 0);
  if (errno != 0 || *end != '\0' || *v == '-') {
    throw ConfigError(std::string("QGARS_SEED: not an unsigned 64-bit integer: ") + v);
  }
  return static_cast<std::uint64_t>(s);
}

}  // namespace qgars
