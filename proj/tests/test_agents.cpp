#include <doctest.h>

#include <cmath>
#include <random>

#include "mdpdt/agents.hpp"

using namespace mdpdt;
using agents::AgentConfig;
using agents::MdpDtAgent;
using agents::Mode;
using agents::QLearningAgent;
using env::ClusterSim;
using env::SimConfig;

namespace {

AgentConfig default_dt_config() {
  AgentConfig cfg;
  cfg.update.algorithm = UpdateAlgorithm::prioritized_sweeping;
  cfg.criterion = {split::Criterion::parameter_test, stats::TestKind::mann_whitney,
                   0.002};
  cfg.strategy = {split::StrategyKind::default_, 0, 0};
  return cfg;
}

}  // namespace

TEST_CASE("select_action: greedy with a single tried action") {
  const auto space = ClusterSim::make_space();
  MdpDtAgent agent(space, 3, default_dt_config());
  ClusterSim sim(SimConfig{}, 3);
  const auto m = sim.current();
  auto [m2, r] = sim.step(1);
  agent.observe({m, 1, m2, r}, false);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) CHECK(agent.act(m, 0.0, rng) == 1);
}

TEST_CASE("select_action: epsilon = 1 is uniform over the action set") {
  const auto space = ClusterSim::make_space();
  MdpDtAgent agent(space, 3, default_dt_config());
  std::mt19937_64 rng(5);
  const Measurement m(space.size(), 0.5);
  std::array<int, 3> hits{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) hits[static_cast<std::size_t>(agent.act(m, 1.0, rng))]++;
  // chi-square against uniform, 2 dof; 16.27 is the 0.0003 tail
  double chi2 = 0.0;
  for (int h : hits) {
    const double expect = n / 3.0;
    chi2 += (h - expect) * (h - expect) / expect;
  }
  CHECK(chi2 < 16.27);
}

TEST_CASE("select_action: epsilon = 0.3 picks the optimal arm about 80% of the time") {
  const auto space = ClusterSim::make_space();
  MdpDtAgent agent(space, 3, default_dt_config());
  ClusterSim sim(SimConfig{}, 7);
  // seed one rewarding action so the greedy branch has a target
  const auto m = sim.current();
  auto [m2, r] = sim.step(2);
  agent.observe({m, 2, m2, 10.0}, false);

  std::mt19937_64 rng(11);
  const int n = 10000;
  int optimal = 0;
  for (int i = 0; i < n; ++i)
    if (agent.act(m, 0.3, rng) == 2) ++optimal;
  // p = 0.7 + 0.3/3 = 0.8; allow 3 sigma
  const double p = 0.8;
  const double sigma = std::sqrt(p * (1 - p) * n);
  CHECK(std::fabs(optimal - p * n) < 3.0 * sigma);
}

TEST_CASE("run_episode: zero steps, and eval never mutates the agent") {
  SimConfig sim_cfg;
  ClusterSim sim(sim_cfg, 13);
  MdpDtAgent agent(sim.space(), sim.num_actions(), default_dt_config());
  std::mt19937_64 rng(17);

  const auto metrics0 = run_episode(agent, sim, 0, Mode::train, rng);
  CHECK(metrics0.total_eval_reward == 0.0);
  CHECK(metrics0.splits_total == 0);

  run_episode(agent, sim, 400, Mode::train, rng);
  const auto states_after_train = agent.num_states();
  const auto journal_after_train = agent.journal().size();
  const auto checkpoint_after_train = agent.checkpoint();

  const auto eval = run_episode(agent, sim, 200, Mode::eval, rng);
  CHECK(agent.num_states() == states_after_train);
  CHECK(agent.journal().size() == journal_after_train);
  CHECK(agent.checkpoint() == checkpoint_after_train);
  CHECK(eval.splits_total == 0);
  CHECK(eval.final_states == states_after_train);
}

TEST_CASE("trained MDP_DT beats a random policy on the simulator") {
  std::vector<double> trained, random_rewards;
  for (int seed = 0; seed < 3; ++seed) {
    SimConfig sim_cfg;
    ClusterSim sim(sim_cfg, 100 + seed);
    MdpDtAgent agent(sim.space(), sim.num_actions(), default_dt_config());
    std::mt19937_64 rng(200 + seed);
    run_episode(agent, sim, 1500, Mode::train, rng);
    trained.push_back(
        run_episode(agent, sim, 500, Mode::eval, rng).total_eval_reward);

    ClusterSim rsim(sim_cfg, 100 + seed);
    std::mt19937_64 rrng(300 + seed);
    double total = 0.0;
    rsim.reset();
    for (int i = 0; i < 2000; ++i) {
      const auto [m, r] = rsim.step(static_cast<int>(rrng() % 3));
      if (i >= 1500) total += r;
    }
    random_rewards.push_back(total);
  }
  std::sort(trained.begin(), trained.end());
  std::sort(random_rewards.begin(), random_rewards.end());
  CHECK(trained[1] > random_rewards[1]);  // median over 3 seeds
}

TEST_CASE("train_offline: empty log, determinism, and growth past the grid") {
  const auto space = ClusterSim::make_space();
  AgentConfig cfg = default_dt_config();
  cfg.initial_tree = {{"vms", {7.5, 14.5}}, {"load", {50.0}}};  // 6 states

  MdpDtAgent untouched(space, 3, cfg);
  agents::train_offline(untouched, {});
  CHECK(untouched.num_states() == 6);
  CHECK(untouched.journal().size() == 0);

  const auto log = env::generate_dataset(SimConfig{}, 500, 77);
  MdpDtAgent once(space, 3, cfg), twice(space, 3, cfg);
  agents::train_offline(once, log);
  agents::train_offline(twice, log);
  CHECK(once.num_states() > 6);
  CHECK(once.checkpoint() == twice.checkpoint());
  CHECK(once.model().tree() == twice.model().tree());
}

TEST_CASE("q-learning update: pinned examples and geometric convergence") {
  const auto space = ClusterSim::make_space();
  AgentConfig cfg;
  cfg.alpha = 0.5;
  cfg.gamma = 0.9;
  QLearningAgent agent(space, 3, cfg, false);
  agent.q_learning_update(0, 1, 10.0, 0);
  CHECK(agent.q(0, 1) == doctest::Approx(5.0));

  AgentConfig full;
  full.alpha = 1.0;
  full.gamma = 0.9;
  QLearningAgent hard(space, 3, full, false);
  hard.q_learning_update(0, 0, 4.0, 0);
  CHECK(hard.q(0, 0) == doctest::Approx(4.0 + 0.9 * 0.0));
  hard.q_learning_update(0, 0, 4.0, 0);
  CHECK(hard.q(0, 0) == doctest::Approx(4.0 + 0.9 * 4.0));

  // repeated identical transitions: error contracts by (1 - alpha) each step
  AgentConfig soft;
  soft.alpha = 0.25;
  soft.gamma = 0.0;
  QLearningAgent slow(space, 3, soft, false);
  double expect_error = 8.0;  // target q = 8, start at 0
  for (int i = 0; i < 12; ++i) {
    const double before_error = std::fabs(slow.q(0, 2) - 8.0);
    CHECK(before_error == doctest::Approx(expect_error).epsilon(1e-12));
    slow.q_learning_update(0, 2, 8.0, 0);
    expect_error *= 0.75;
  }
}

TEST_CASE("QDT discards the split leaf's buffer and seeds children Q") {
  const auto space = ClusterSim::make_space();
  AgentConfig cfg;
  cfg.gamma = 0.0;
  cfg.alpha = 1.0;
  cfg.criterion = {split::Criterion::parameter_test, stats::TestKind::mann_whitney,
                   0.05};
  cfg.strategy = {split::StrategyKind::default_, 0, 0};
  QLearningAgent agent(space, 3, cfg, true);
  REQUIRE(agent.num_states() == 1);

  // rewards correlate hard with the load dimension; everything else constant
  std::mt19937_64 rng(3);
  Measurement m(space.size(), 0.5);
  for (int i = 0; i < 200 && agent.num_states() == 1; ++i) {
    const double load = static_cast<double>(rng() % 100);
    m[1] = load;
    Measurement next = m;
    agent.observe({m, 0, next, load > 50 ? 10.0 : -10.0}, true);
  }
  REQUIRE(agent.num_states() == 2);
  CHECK(agent.journal().size() == 1);
  CHECK(agent.journal().entries()[0].param == "load");
  CHECK(agent.buffered_experiences(0) == 0);  // discarded at the split
  CHECK(agent.buffered_experiences(1) == 0);
  CHECK(agent.q(0, 0) == agent.q(1, 0));  // children inherit the parent row

  const auto text = agent.checkpoint();
  CHECK(text.find("\"tree\"") != std::string::npos);
  CHECK(text.find("\"q\"") != std::string::npos);
}

TEST_CASE("static MDP is MDP_DT with a grid and splitting disabled") {
  const auto space = ClusterSim::make_space();
  AgentConfig grid_cfg = default_dt_config();
  grid_cfg.initial_tree = {{"vms", {10.5}}, {"load", {50.0}}};
  grid_cfg.strategy.kind = split::StrategyKind::none;

  SimConfig sim_cfg;
  ClusterSim sim_a(sim_cfg, 31), sim_b(sim_cfg, 31);
  MdpDtAgent a(space, 3, grid_cfg), b(space, 3, grid_cfg);
  std::mt19937_64 rng_a(33), rng_b(33);
  run_episode(a, sim_a, 500, Mode::train, rng_a);
  run_episode(b, sim_b, 500, Mode::train, rng_b);
  CHECK(a.num_states() == 4);
  CHECK(a.journal().size() == 0);
  CHECK(a.checkpoint() == b.checkpoint());  // full-run determinism
}

TEST_CASE("full runs are reproducible given (agent seed, env seed, config)") {
  SimConfig sim_cfg;
  const auto run_once = [&] {
    ClusterSim sim(sim_cfg, 71);
    MdpDtAgent agent(sim.space(), sim.num_actions(), default_dt_config());
    std::mt19937_64 rng(72);
    run_episode(agent, sim, 600, Mode::train, rng);
    const auto eval = run_episode(agent, sim, 200, Mode::eval, rng);
    return std::pair{agent.checkpoint(), eval.total_eval_reward};
  };
  const auto [cp1, r1] = run_once();
  const auto [cp2, r2] = run_once();
  CHECK(cp1 == cp2);
  CHECK(r1 == r2);
}
