#include "mdpdt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace mdpdt::harness {

using nlohmann::json;

MetricStats aggregate(std::vector<double> values) {
  MetricStats stats;
  if (values.empty()) return stats;
  stats.defined = true;
  stats.n = static_cast<int>(values.size());
  const double n = static_cast<double>(values.size());
  stats.mean = 0.0;
  for (double v : values) stats.mean += v;
  stats.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
    stats.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  stats.median = values.size() % 2 == 1
                     ? values[mid]
                     : 0.5 * (values[mid - 1] + values[mid]);
  return stats;
}

std::vector<double> equal_partition_points(double lo, double hi, int bins) {
  if (bins < 2) throw InvalidConfig("equal partition needs at least 2 bins");
  std::vector<double> points;
  points.reserve(static_cast<std::size_t>(bins) - 1);
  for (int k = 1; k < bins; ++k)
    points.push_back(lo + (hi - lo) * static_cast<double>(k) / bins);
  return points;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<double> midpoint_grid_points(int lo, int hi, int step) {
  // Boundaries at x.5 between attained integer values, e.g. 2.5, 4.5, ...
  std::vector<double> points;
  for (int v = lo + step; v <= hi; v += step)
    points.push_back(static_cast<double>(v) - 0.5);
  return points;
}

GridSpec default_grid_1d() { return {{"vms", midpoint_grid_points(1, 19, 2)}}; }

GridSpec default_grid_2d() {
  return {{"vms", midpoint_grid_points(1, 19, 2)},
          {"load", equal_partition_points(0.0, 100.0, 5)}};
}

GridSpec default_grid_3d() {
  return {{"vms", midpoint_grid_points(1, 19, 2)},
          {"load", equal_partition_points(0.0, 100.0, 5)},
          {"read_pct", equal_partition_points(0.5, 1.0, 4)}};
}

// The 96-state static baseline: cluster size and load in 12 and 8 partitions.
GridSpec default_static_grid() {
  return {{"vms", equal_partition_points(1.0, 20.0, 12)},
          {"load", equal_partition_points(0.0, 100.0, 8)}};
}

// The small starting partition used by the decision-tree agents: 3 x 2 = 6.
GridSpec default_dt_initial_tree() {
  return {{"vms", {7.5, 14.5}}, {"load", {50.0}}};
}

}  // namespace

ExperimentSpec default_spec(const std::string& kind) {
  ExperimentSpec spec;
  spec.name = kind;
  if (kind == "sweep") {
    spec.tests = {stats::TestKind::student_t, stats::TestKind::welch,
                  stats::TestKind::mann_whitney, stats::TestKind::kolmogorov_smirnov};
  } else if (kind == "strategies") {
    spec.strategies = {
        {split::StrategyKind::default_, 0, 0},
        {split::StrategyKind::chain, 0, 0},
        {split::StrategyKind::training, 2500, 0},
        {split::StrategyKind::training_chain, 5000, 0},
        {split::StrategyKind::reset_chain, 0, 500},
        {split::StrategyKind::reset_chain_multipoint, 0, 500},
        {split::StrategyKind::training_chain_reset, 5000, 500},
        {split::StrategyKind::two_phase, 0, 10},
        {split::StrategyKind::two_phase, 0, 100},
        {split::StrategyKind::two_phase, 0, 500},
    };
  } else if (kind == "grids") {
    spec.grids = {{"single_root", {}},
                  {"grid_1d", default_grid_1d()},
                  {"grid_2d", default_grid_2d()},
                  {"grid_3d", default_grid_3d()}};
  } else if (kind == "compare") {
    spec.dataset_profile.kind = env::WorkloadProfile::Kind::variable_amplitude_sinusoid;
    spec.static_grid = default_static_grid();
    spec.dt_initial_tree = default_dt_initial_tree();
  } else if (kind == "dataset" || kind == "train" || kind == "experiment") {
    // env/agent blocks only
  } else {
    throw InvalidConfig("unknown experiment kind: " + kind);
  }
  return spec;
}

namespace {

json profile_to_json(const env::WorkloadProfile& p) {
  return {{"kind", env::WorkloadProfile::kind_name(p.kind)},
          {"baseline", p.baseline},
          {"amplitude", p.amplitude},
          {"period", p.period},
          {"amplitude_period", p.amplitude_period},
          {"duty_cycle", p.duty_cycle}};
}

json sim_to_json(const env::SimConfig& s) {
  return {{"profile", profile_to_json(s.profile)},
          {"actions", s.action_deltas},
          {"min_vms", s.min_vms},
          {"max_vms", s.max_vms},
          {"initial_vms", s.initial_vms},
          {"capacity_per_vm", s.capacity_per_vm},
          {"vm_cost", s.vm_cost},
          {"read_baseline", s.read_baseline},
          {"read_amplitude", s.read_amplitude},
          {"read_period", s.read_period}};
}

json grid_to_json(const GridSpec& g) {
  json arr = json::array();
  for (const auto& [param, points] : g)
    arr.push_back({{"param", param}, {"points", points}});
  return arr;
}

json strategy_to_json(const split::StrategyConfig& s) {
  return {{"kind", split::strategy_name(s.kind)}, {"n", s.n}, {"p", s.p}};
}

json agent_to_json(const agents::AgentConfig& a) {
  return {{"gamma", a.gamma},
          {"alpha", a.alpha},
          {"epsilon", a.epsilon},
          {"update",
           {{"algorithm", update_algorithm_name(a.update.algorithm)},
            {"vi_tolerance", a.update.vi_tolerance},
            {"ps_max_backups", a.update.ps_max_backups},
            {"ps_threshold", a.update.ps_threshold}}},
          {"criterion",
           {{"criterion", split::criterion_name(a.criterion.criterion)},
            {"test", stats::test_name(a.criterion.test)},
            {"max_type_i_error", a.criterion.max_type_i_error}}},
          {"strategy", strategy_to_json(a.strategy)},
          {"initial_tree", grid_to_json(a.initial_tree)}};
}

// Field-path-aware fetch so config errors name the offending entry.
template <typename T>
T fetch(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw InvalidConfig("missing config field: " + path + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidConfig("bad config field " + path + key + ": " + e.what());
  }
}

template <typename T>
void maybe(const json& j, const std::string& path, const std::string& key, T& out) {
  if (!j.contains(key)) return;
  out = fetch<T>(j, path, key);
}

env::WorkloadProfile profile_from_json(const json& j, const std::string& path) {
  env::WorkloadProfile p;
  std::string kind = env::WorkloadProfile::kind_name(p.kind);
  maybe(j, path, "kind", kind);
  try {
    p.kind = env::WorkloadProfile::kind_from_name(kind);
  } catch (const std::invalid_argument& e) {
    throw InvalidConfig(path + "kind: " + e.what());
  }
  maybe(j, path, "baseline", p.baseline);
  maybe(j, path, "amplitude", p.amplitude);
  maybe(j, path, "period", p.period);
  maybe(j, path, "amplitude_period", p.amplitude_period);
  maybe(j, path, "duty_cycle", p.duty_cycle);
  if (!(p.period > 0.0)) throw InvalidConfig(path + "period: must be positive");
  return p;
}

env::SimConfig sim_from_json(const json& j, const std::string& path) {
  env::SimConfig s;
  if (j.contains("profile")) s.profile = profile_from_json(j.at("profile"), path + "profile.");
  maybe(j, path, "actions", s.action_deltas);
  maybe(j, path, "min_vms", s.min_vms);
  maybe(j, path, "max_vms", s.max_vms);
  maybe(j, path, "initial_vms", s.initial_vms);
  maybe(j, path, "capacity_per_vm", s.capacity_per_vm);
  maybe(j, path, "vm_cost", s.vm_cost);
  maybe(j, path, "read_baseline", s.read_baseline);
  maybe(j, path, "read_amplitude", s.read_amplitude);
  maybe(j, path, "read_period", s.read_period);
  if (s.action_deltas.empty()) throw InvalidConfig(path + "actions: must be non-empty");
  if (s.min_vms < 1 || s.max_vms < s.min_vms)
    throw InvalidConfig(path + "min_vms/max_vms: bad cluster size bounds");
  return s;
}

GridSpec grid_from_json(const json& j, const std::string& path) {
  GridSpec grid;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "].";
    grid.emplace_back(fetch<std::string>(j.at(i), p, "param"),
                      fetch<std::vector<double>>(j.at(i), p, "points"));
  }
  return grid;
}

split::StrategyConfig strategy_from_json(const json& j, const std::string& path) {
  split::StrategyConfig s;
  std::string kind = split::strategy_name(s.kind);
  maybe(j, path, "kind", kind);
  try {
    s.kind = split::strategy_from_name(kind);
  } catch (const std::invalid_argument& e) {
    throw InvalidConfig(path + "kind: " + e.what());
  }
  maybe(j, path, "n", s.n);
  maybe(j, path, "p", s.p);
  using K = split::StrategyKind;
  if ((s.kind == K::training || s.kind == K::training_chain ||
       s.kind == K::training_chain_reset) &&
      s.n <= 0)
    throw InvalidConfig(path + "n: training strategies need a positive n");
  if ((s.kind == K::reset_chain || s.kind == K::reset_chain_multipoint ||
       s.kind == K::training_chain_reset || s.kind == K::two_phase) &&
      s.p <= 0)
    throw InvalidConfig(path + "p: periodic strategies need a positive p");
  return s;
}

agents::AgentConfig agent_from_json(const json& j, const std::string& path) {
  agents::AgentConfig a;
  maybe(j, path, "gamma", a.gamma);
  maybe(j, path, "alpha", a.alpha);
  maybe(j, path, "epsilon", a.epsilon);
  if (!(a.gamma >= 0.0 && a.gamma < 1.0))
    throw InvalidConfig(path + "gamma: must lie in [0, 1)");
  if (!(a.alpha > 0.0 && a.alpha <= 1.0))
    throw InvalidConfig(path + "alpha: must lie in (0, 1]");
  if (!(a.epsilon >= 0.0 && a.epsilon <= 1.0))
    throw InvalidConfig(path + "epsilon: must lie in [0, 1]");
  if (j.contains("update")) {
    const json& u = j.at("update");
    const std::string up = path + "update.";
    std::string algo = update_algorithm_name(a.update.algorithm);
    maybe(u, up, "algorithm", algo);
    try {
      a.update.algorithm = update_algorithm_from_name(algo);
    } catch (const std::invalid_argument& e) {
      throw InvalidConfig(up + "algorithm: " + e.what());
    }
    maybe(u, up, "vi_tolerance", a.update.vi_tolerance);
    maybe(u, up, "ps_max_backups", a.update.ps_max_backups);
    maybe(u, up, "ps_threshold", a.update.ps_threshold);
  }
  if (j.contains("criterion")) {
    const json& c = j.at("criterion");
    const std::string cp = path + "criterion.";
    std::string crit = split::criterion_name(a.criterion.criterion);
    std::string test = stats::test_name(a.criterion.test);
    maybe(c, cp, "criterion", crit);
    maybe(c, cp, "test", test);
    try {
      a.criterion.criterion = split::criterion_from_name(crit);
      a.criterion.test = stats::test_from_name(test);
    } catch (const std::invalid_argument& e) {
      throw InvalidConfig(cp + ": " + e.what());
    }
    maybe(c, cp, "max_type_i_error", a.criterion.max_type_i_error);
    if (!(a.criterion.max_type_i_error > 0.0 && a.criterion.max_type_i_error < 1.0))
      throw InvalidConfig(cp + "max_type_i_error: must lie in (0, 1)");
  }
  if (j.contains("strategy"))
    a.strategy = strategy_from_json(j.at("strategy"), path + "strategy.");
  if (j.contains("initial_tree"))
    a.initial_tree = grid_from_json(j.at("initial_tree"), path + "initial_tree");
  return a;
}

}  // namespace

std::string spec_to_json(const ExperimentSpec& spec) {
  json tests = json::array();
  for (auto t : spec.tests) tests.push_back(stats::test_name(t));
  json strategies = json::array();
  for (const auto& s : spec.strategies) strategies.push_back(strategy_to_json(s));
  json grids = json::array();
  for (const auto& [label, grid] : spec.grids)
    grids.push_back({{"name", label}, {"tree", grid_to_json(grid)}});
  json doc = {{"name", spec.name},
              {"train_steps", spec.train_steps},
              {"eval_steps", spec.eval_steps},
              {"replicates", spec.replicates},
              {"seed_base", spec.seed_base},
              {"parallel", spec.parallel},
              {"env", sim_to_json(spec.sim)},
              {"agent", agent_to_json(spec.agent)},
              {"sweep", {{"margins", spec.margins}, {"tests", tests}}},
              {"strategies", strategies},
              {"grids", grids},
              {"compare",
               {{"dataset_sizes", spec.dataset_sizes},
                {"dataset_profile", profile_to_json(spec.dataset_profile)},
                {"agents", spec.compare_agents},
                {"static_grid", grid_to_json(spec.static_grid)},
                {"dt_initial_tree", grid_to_json(spec.dt_initial_tree)}}}};
  return doc.dump(2);
}

ExperimentSpec spec_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentSpec spec;
  maybe(doc, "", "name", spec.name);
  maybe(doc, "", "train_steps", spec.train_steps);
  maybe(doc, "", "eval_steps", spec.eval_steps);
  maybe(doc, "", "replicates", spec.replicates);
  maybe(doc, "", "seed_base", spec.seed_base);
  maybe(doc, "", "parallel", spec.parallel);
  if (spec.train_steps < 0) throw InvalidConfig("train_steps: must be >= 0");
  if (spec.eval_steps < 0) throw InvalidConfig("eval_steps: must be >= 0");
  if (spec.replicates < 1) throw InvalidConfig("replicates: must be >= 1");
  if (spec.parallel < 1) throw InvalidConfig("parallel: must be >= 1");
  if (doc.contains("env")) spec.sim = sim_from_json(doc.at("env"), "env.");
  if (doc.contains("agent")) spec.agent = agent_from_json(doc.at("agent"), "agent.");
  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    maybe(s, "sweep.", "margins", spec.margins);
    for (double m : spec.margins)
      if (!(m > 0.0 && m < 1.0))
        throw InvalidConfig("sweep.margins: every margin must lie in (0, 1)");
    {
      std::vector<double> sorted = spec.margins;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InvalidConfig("sweep.margins: values must be distinct");
    }
    if (s.contains("tests")) {
      spec.tests.clear();
      for (const auto& name : fetch<std::vector<std::string>>(s, "sweep.", "tests")) {
        try {
          spec.tests.push_back(stats::test_from_name(name));
        } catch (const std::invalid_argument& e) {
          throw InvalidConfig(std::string("sweep.tests: ") + e.what());
        }
      }
    }
  }
  if (doc.contains("strategies")) {
    spec.strategies.clear();
    const json& arr = doc.at("strategies");
    for (std::size_t i = 0; i < arr.size(); ++i)
      spec.strategies.push_back(strategy_from_json(
          arr.at(i), "strategies[" + std::to_string(i) + "]."));
  }
  if (doc.contains("grids")) {
    spec.grids.clear();
    const json& arr = doc.at("grids");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "grids[" + std::to_string(i) + "].";
      spec.grids.emplace_back(
          fetch<std::string>(arr.at(i), path, "name"),
          grid_from_json(arr.at(i).at("tree"), path + "tree"));
    }
  }
  if (doc.contains("compare")) {
    const json& c = doc.at("compare");
    maybe(c, "compare.", "dataset_sizes", spec.dataset_sizes);
    if (c.contains("dataset_profile"))
      spec.dataset_profile =
          profile_from_json(c.at("dataset_profile"), "compare.dataset_profile.");
    maybe(c, "compare.", "agents", spec.compare_agents);
    for (const auto& name : spec.compare_agents)
      if (name != "mdp_dt" && name != "mdp" && name != "qdt" && name != "q_learning")
        throw InvalidConfig("compare.agents: unknown agent " + name);
    if (c.contains("static_grid"))
      spec.static_grid = grid_from_json(c.at("static_grid"), "compare.static_grid");
    if (c.contains("dt_initial_tree"))
      spec.dt_initial_tree =
          grid_from_json(c.at("dt_initial_tree"), "compare.dt_initial_tree");
  }
  return spec;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

agents::RunMetrics run_replicate(const ExperimentSpec& spec,
                                 const agents::AgentConfig& agent_cfg, int replicate,
                                 std::vector<agents::TracePoint>* trace) {
  const std::uint64_t seed = spec.seed_base + static_cast<std::uint64_t>(replicate);
  env::ClusterSim sim(spec.sim, seed);
  std::mt19937_64 agent_rng(seed ^ 0xa5a5a5a5deadbeefULL);
  agents::MdpDtAgent agent(sim.space(), sim.num_actions(), agent_cfg);
  const auto train =
      run_episode(agent, sim, spec.train_steps, agents::Mode::train, agent_rng);
  auto metrics =
      run_episode(agent, sim, spec.eval_steps, agents::Mode::eval, agent_rng, trace);
  metrics.splits_total = train.splits_total;
  metrics.splits_correct = train.splits_correct;
  return metrics;
}

namespace {

struct MetricsBundle {
  std::vector<double> reward, splits, accuracy, states;

  void add(const agents::RunMetrics& m) {
    reward.push_back(m.total_eval_reward);
    splits.push_back(static_cast<double>(m.splits_total));
    if (m.splits_total > 0)
      accuracy.push_back(static_cast<double>(m.splits_correct) /
                         static_cast<double>(m.splits_total));
    states.push_back(static_cast<double>(m.final_states));
  }
};

MetricsBundle collect_replicates(const ExperimentSpec& spec,
                                 const agents::AgentConfig& agent_cfg) {
  std::vector<agents::RunMetrics> results(static_cast<std::size_t>(spec.replicates));
  parallel_for(spec.replicates, spec.parallel, [&](int r) {
    results[static_cast<std::size_t>(r)] = run_replicate(spec, agent_cfg, r);
  });
  MetricsBundle bundle;
  for (const auto& m : results) bundle.add(m);  // merged in replicate order
  return bundle;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec) {
  std::vector<SweepRow> rows;
  for (const auto test : spec.tests) {
    for (const double margin : spec.margins) {
      agents::AgentConfig cfg = spec.agent;
      cfg.criterion.test = test;
      cfg.criterion.max_type_i_error = margin;
      const auto bundle = collect_replicates(spec, cfg);
      rows.push_back({stats::test_name(test), margin, aggregate(bundle.reward),
                      aggregate(bundle.splits), aggregate(bundle.accuracy),
                      aggregate(bundle.states)});
    }
  }
  return rows;
}

std::vector<LabelRow> run_strategies(const ExperimentSpec& spec) {
  std::vector<LabelRow> rows;
  for (const auto& strategy : spec.strategies) {
    agents::AgentConfig cfg = spec.agent;
    cfg.strategy = strategy;
    std::string label = split::strategy_name(strategy.kind);
    if (strategy.n > 0) label += "_n" + std::to_string(strategy.n);
    if (strategy.p > 0) label += "_p" + std::to_string(strategy.p);
    const auto bundle = collect_replicates(spec, cfg);
    rows.push_back({label, aggregate(bundle.reward), aggregate(bundle.splits),
                    aggregate(bundle.accuracy), aggregate(bundle.states)});
  }
  return rows;
}

std::vector<LabelRow> run_grids(const ExperimentSpec& spec) {
  std::vector<LabelRow> rows;
  for (const auto& [label, grid] : spec.grids) {
    agents::AgentConfig cfg = spec.agent;
    cfg.initial_tree = grid;
    const auto bundle = collect_replicates(spec, cfg);
    rows.push_back({label, aggregate(bundle.reward), aggregate(bundle.splits),
                    aggregate(bundle.accuracy), aggregate(bundle.states)});
  }
  return rows;
}

namespace {

std::unique_ptr<agents::Agent> make_compare_agent(const ExperimentSpec& spec,
                                                  const std::string& kind,
                                                  const ParameterSpace& space,
                                                  std::size_t num_actions) {
  agents::AgentConfig cfg = spec.agent;
  if (kind == "mdp_dt") {
    cfg.initial_tree = spec.dt_initial_tree;
    return std::make_unique<agents::MdpDtAgent>(space, num_actions, cfg);
  }
  if (kind == "mdp") {
    cfg.initial_tree = spec.static_grid;
    cfg.strategy.kind = split::StrategyKind::none;
    return std::make_unique<agents::MdpDtAgent>(space, num_actions, cfg);
  }
  if (kind == "qdt") {
    cfg.initial_tree = spec.dt_initial_tree;
    cfg.strategy.kind = split::StrategyKind::default_;
    return std::make_unique<agents::QLearningAgent>(space, num_actions, cfg, true);
  }
  if (kind == "q_learning") {
    cfg.initial_tree = spec.static_grid;
    cfg.strategy.kind = split::StrategyKind::none;
    return std::make_unique<agents::QLearningAgent>(space, num_actions, cfg, false);
  }
  throw InvalidConfig("compare.agents: unknown agent " + kind);
}

}  // namespace

std::vector<CompareRow> run_compare(const ExperimentSpec& spec) {
  std::vector<CompareRow> rows;
  const ParameterSpace space = env::ClusterSim::make_space();
  for (const auto& agent_kind : spec.compare_agents) {
    for (const std::size_t dataset_size : spec.dataset_sizes) {
      struct PerReplicate {
        agents::RunMetrics metrics;
        std::vector<agents::TracePoint> trace;
      };
      std::vector<PerReplicate> results(static_cast<std::size_t>(spec.replicates));
      parallel_for(spec.replicates, spec.parallel, [&](int r) {
        const std::uint64_t seed = spec.seed_base + static_cast<std::uint64_t>(r);
        env::SimConfig train_sim = spec.sim;
        train_sim.profile = spec.dataset_profile;
        const auto log = env::generate_dataset(train_sim, dataset_size, seed);

        auto agent = make_compare_agent(spec, agent_kind, space,
                                        spec.sim.action_deltas.size());
        agents::train_offline(*agent, log);

        env::ClusterSim eval_sim(spec.sim, seed);
        std::mt19937_64 rng(seed ^ 0xa5a5a5a5deadbeefULL);
        auto& out = results[static_cast<std::size_t>(r)];
        out.metrics = run_episode(*agent, eval_sim, spec.eval_steps,
                                  agents::Mode::eval, rng, &out.trace);
      });
      MetricsBundle bundle;
      std::vector<double> variances;
      for (const auto& res : results) {
        bundle.add(res.metrics);
        if (res.trace.size() > 1) {
          double mean = 0.0;
          for (const auto& p : res.trace) mean += p.vms;
          mean /= static_cast<double>(res.trace.size());
          double var = 0.0;
          for (const auto& p : res.trace) var += (p.vms - mean) * (p.vms - mean);
          variances.push_back(var / static_cast<double>(res.trace.size() - 1));
        }
      }
      rows.push_back({agent_kind, dataset_size, aggregate(bundle.reward),
                      aggregate(bundle.states), aggregate(variances),
                      std::move(results[0].trace)});
    }
  }
  return rows;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_stats_cells(std::ostream& out, const MetricStats& stats) {
  if (!stats.defined) {
    out << ",,,0";
    return;
  }
  out << fmt(stats.mean) << ',' << fmt(stats.se) << ',' << fmt(stats.median) << ','
      << stats.n;
}

}  // namespace

std::vector<std::filesystem::path> write_sweep_csvs(
    const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  const std::vector<std::pair<std::string, MetricStats SweepRow::*>> metrics = {
      {"reward", &SweepRow::reward},
      {"splits", &SweepRow::splits},
      {"accuracy", &SweepRow::accuracy},
      {"states", &SweepRow::states}};
  for (const auto& [name, member] : metrics) {
    const auto path = out_dir / (name + ".csv");
    auto out = open_csv(path);
    out << "test,margin,mean,stderr,median,replicates\n";
    for (const auto& row : rows) {
      out << row.test << ',' << fmt(row.margin) << ',';
      write_stats_cells(out, row.*member);
      out << '\n';
    }
    paths.push_back(path);
  }
  return paths;
}

std::vector<std::filesystem::path> write_label_csvs(
    const std::vector<LabelRow>& rows, const std::string& key_column,
    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  const std::vector<std::pair<std::string, MetricStats LabelRow::*>> metrics = {
      {"reward", &LabelRow::reward},
      {"splits", &LabelRow::splits},
      {"accuracy", &LabelRow::accuracy},
      {"states", &LabelRow::states}};
  for (const auto& [name, member] : metrics) {
    const auto path = out_dir / (name + ".csv");
    auto out = open_csv(path);
    out << key_column << ",mean,stderr,median,replicates\n";
    for (const auto& row : rows) {
      out << row.label << ',';
      write_stats_cells(out, row.*member);
      out << '\n';
    }
    paths.push_back(path);
  }
  return paths;
}

std::vector<std::filesystem::path> write_compare_csvs(
    const std::vector<CompareRow>& rows, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  {
    const auto path = out_dir / "reward.csv";
    auto out = open_csv(path);
    out << "agent,dataset_size,mean,stderr,median,replicates\n";
    for (const auto& row : rows) {
      out << row.agent << ',' << row.dataset_size << ',';
      write_stats_cells(out, row.reward);
      out << '\n';
    }
    paths.push_back(path);
  }
  {
    const auto path = out_dir / "states.csv";
    auto out = open_csv(path);
    out << "agent,dataset_size,mean,stderr,median,replicates\n";
    for (const auto& row : rows) {
      out << row.agent << ',' << row.dataset_size << ',';
      write_stats_cells(out, row.states);
      out << '\n';
    }
    paths.push_back(path);
  }
  {
    const auto path = out_dir / "vms_variance.csv";
    auto out = open_csv(path);
    out << "agent,dataset_size,mean,stderr,median,replicates\n";
    for (const auto& row : rows) {
      out << row.agent << ',' << row.dataset_size << ',';
      write_stats_cells(out, row.vms_variance);
      out << '\n';
    }
    paths.push_back(path);
  }
  for (const auto& row : rows) {
    const auto path =
        out_dir / ("trace_" + row.agent + "_" + std::to_string(row.dataset_size) + ".csv");
    auto out = open_csv(path);
    out << "t,load,vms,action,reward,optimal_reward\n";
    for (const auto& p : row.trace)
      out << p.t << ',' << fmt(p.load) << ',' << p.vms << ',' << p.action << ','
          << fmt(p.reward) << ',' << fmt(p.optimal_reward) << '\n';
    paths.push_back(path);
  }
  return paths;
}

std::filesystem::path emit_plot_script(
    const std::vector<std::filesystem::path>& csv_paths,
    const std::filesystem::path& script_path) {
  std::ofstream out(script_path);
  if (!out) throw std::runtime_error("cannot write " + script_path.string());
  out << "#!/usr/bin/env python3\n"
      << "\"\"\"Renders the experiment CSVs next to this script as PNG files.\"\"\"\n"
      << "import csv\n"
      << "import os\n"
      << "import matplotlib\n"
      << "matplotlib.use(\"Agg\")\n"
      << "import matplotlib.pyplot as plt\n\n"
      << "FILES = [\n";
  for (const auto& path : csv_paths)
    out << "    " << std::filesystem::absolute(path) << ",\n";
  out << "]\n\n";
  out << R"PY(
def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def numeric(rows, key):
    return [float(r[key]) for r in rows]


for path in FILES:
    rows = read_rows(path)
    if not rows:
        continue
    columns = list(rows[0].keys())
    fig, ax = plt.subplots(figsize=(6, 4))
    metric = os.path.splitext(os.path.basename(path))[0]
    if "margin" in columns:
        # one series per statistical test, margin on a log axis
        by_test = {}
        for r in rows:
            by_test.setdefault(r["test"], []).append(r)
        for test, series in sorted(by_test.items()):
            series = [r for r in series if r["mean"] != ""]
            if not series:
                continue
            xs = numeric(series, "margin")
            ys = numeric(series, "mean")
            es = numeric(series, "stderr")
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=test)
        ax.set_xscale("log")
        ax.set_xlabel("max type-I error")
        ax.set_ylabel(metric)
        ax.legend()
    elif columns[0] == "t":
        ax.plot(numeric(rows, "t"), numeric(rows, "load"), label="load")
        twin = ax.twinx()
        twin.step(numeric(rows, "t"), numeric(rows, "vms"), where="post",
                  color="tab:red", label="vms")
        ax.set_xlabel("t")
        ax.set_ylabel("load")
        twin.set_ylabel("vms")
    else:
        labeled = [r for r in rows if r["mean"] != ""]
        if not labeled:
            plt.close(fig)
            continue
        if columns[1] == "dataset_size":
            labels = [r[columns[0]] + "/" + r["dataset_size"] for r in labeled]
        else:
            labels = [r[columns[0]] for r in labeled]
        ys = numeric(labeled, "mean")
        es = numeric(labeled, "stderr")
        ax.bar(range(len(labels)), ys, yerr=es, capsize=3)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=45, ha="right")
        ax.set_ylabel(metric)
    fig.tight_layout()
    fig.savefig(path + ".png", dpi=150)
    plt.close(fig)
)PY";
  return script_path;
}

}  // namespace mdpdt::harness
