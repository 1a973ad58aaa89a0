#include "mdpdt/agents.hpp"

#include <algorithm>
#include <cstring>

#include <json.hpp>

namespace mdpdt::agents {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int random_action(std::mt19937_64& rng, std::size_t num_actions) {
  return static_cast<int>(rng() % num_actions);
}

StateIndex make_initial_tree(const ParameterSpace& space, const GridSpec& grid) {
  if (grid.empty()) return StateIndex(space);
  return build_grid(space, grid);
}

bool is_relevant(const std::string& param) {
  for (const char* name : env::kRelevantParams)
    if (param == name) return true;
  return false;
}

}  // namespace

MdpDtAgent::MdpDtAgent(const ParameterSpace& space, std::size_t num_actions,
                       AgentConfig cfg)
    : cfg_(std::move(cfg)),
      initial_tree_(make_initial_tree(space, cfg_.initial_tree)),
      model_(initial_tree_, num_actions, cfg_.gamma) {}

int MdpDtAgent::select_action(StateId s, double epsilon, std::mt19937_64& rng) {
  if (epsilon > 0.0 && uniform01(rng) < epsilon)
    return random_action(rng, num_actions());
  try {
    return model_.optimal_action(s);
  } catch (const NoData&) {
    return random_action(rng, num_actions());
  }
}

int MdpDtAgent::act(const Measurement& m, double epsilon, std::mt19937_64& rng) {
  return select_action(model_.tree().classify(m), epsilon, rng);
}

void MdpDtAgent::observe(const Experience& e, bool allow_splits) {
  ++step_;
  const StateId s = model_.tree().classify(e.m);
  model_.update(e);
  apply_update(model_, cfg_.update, s);
  if (allow_splits)
    split::apply_strategy(model_, step_, e, cfg_.strategy, cfg_.criterion,
                          cfg_.update, &journal_, initial_tree_);
}

std::string MdpDtAgent::checkpoint() const { return model_to_text(model_); }

QLearningAgent::QLearningAgent(const ParameterSpace& space, std::size_t num_actions,
                               AgentConfig cfg, bool enable_splits)
    : cfg_(std::move(cfg)),
      num_actions_(num_actions),
      enable_splits_(enable_splits),
      tree_(make_initial_tree(space, cfg_.initial_tree)) {
  if (num_actions_ == 0) throw std::invalid_argument("agent needs at least one action");
  if (!(cfg_.alpha > 0.0 && cfg_.alpha <= 1.0))
    throw std::invalid_argument("learning rate must lie in (0, 1]");
  if (!(cfg_.gamma >= 0.0 && cfg_.gamma < 1.0))
    throw std::invalid_argument("discount factor must lie in [0, 1)");
  if (enable_splits_ && cfg_.strategy.kind != split::StrategyKind::default_ &&
      cfg_.strategy.kind != split::StrategyKind::none)
    throw std::invalid_argument(
        "decision-tree Q-learning only supports the default splitting strategy");
  q_.resize(tree_.num_states(), std::vector<double>(num_actions_, 0.0));
  counts_.resize(tree_.num_states(), std::vector<std::int64_t>(num_actions_, 0));
  buffers_.resize(tree_.num_states());
}

int QLearningAgent::select_action(StateId s, double epsilon, std::mt19937_64& rng) {
  if (epsilon > 0.0 && uniform01(rng) < epsilon)
    return random_action(rng, num_actions_);
  const auto& counts = counts_.at(s);
  const bool tried = std::any_of(counts.begin(), counts.end(),
                                 [](std::int64_t c) { return c > 0; });
  if (!tried) return random_action(rng, num_actions_);
  const auto& row = q_[s];
  int best = 0;
  for (std::size_t a = 1; a < num_actions_; ++a)
    if (row[a] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  return best;
}

int QLearningAgent::act(const Measurement& m, double epsilon, std::mt19937_64& rng) {
  return select_action(tree_.classify(m), epsilon, rng);
}

void QLearningAgent::q_learning_update(StateId s, int a, double r, StateId s_next) {
  const auto& next = q_.at(s_next);
  const double max_next = *std::max_element(next.begin(), next.end());
  double& q = q_.at(s).at(static_cast<std::size_t>(a));
  q = (1.0 - cfg_.alpha) * q + cfg_.alpha * (r + cfg_.gamma * max_next);
  counts_[s][static_cast<std::size_t>(a)] += 1;
}

void QLearningAgent::observe(const Experience& e, bool allow_splits) {
  ++step_;
  const StateId s = tree_.classify(e.m);
  const StateId s2 = tree_.classify(e.m_next);
  q_learning_update(s, e.action, e.reward, s2);
  if (enable_splits_ && allow_splits &&
      cfg_.strategy.kind == split::StrategyKind::default_) {
    buffers_[s].push_back(e);
    attempt_split(e);
  }
}

void QLearningAgent::attempt_split(const Experience& e) {
  const StateId s = tree_.classify(e.m);
  const auto& counts = counts_.at(s);
  const bool tried = std::any_of(counts.begin(), counts.end(),
                                 [](std::int64_t c) { return c > 0; });
  if (!tried) return;

  const auto& row = q_[s];
  int best = 0;
  for (std::size_t a = 1; a < num_actions_; ++a)
    if (row[a] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(a);

  std::vector<const Experience*> es;
  for (const Experience& buffered : buffers_[s])
    if (buffered.action == best) es.push_back(&buffered);
  if (es.size() < 2) return;

  const auto q_of = [&](const Experience& ex) {
    const auto& next = q_[tree_.classify(ex.m_next)];
    return ex.reward + cfg_.gamma * *std::max_element(next.begin(), next.end());
  };
  const auto box = tree_.state_box(s);
  std::optional<split::SplitDecision> d;
  if (cfg_.criterion.criterion == split::Criterion::parameter_test) {
    d = split::find_parameter_split(es, q_of, row[static_cast<std::size_t>(best)],
                                    tree_.space(), box, cfg_.criterion, s);
  } else {
    d = split::find_q_value_split(
        es, q_of, tree_.space(), box, cfg_.criterion, s,
        cfg_.criterion.criterion == split::Criterion::q_value_test_multipoint);
  }
  if (!d) return;

  const auto [left, right] = tree_.split_leaf(d->state, d->param, d->point);
  // Children inherit the parent's Q row and counts; the experiences that
  // justified the split are discarded.
  q_.push_back(q_[left]);
  counts_.push_back(counts_[left]);
  buffers_[left].clear();
  buffers_.emplace_back();
  journal_.append({step_, d->state, tree_.space().name(d->param), d->point,
                   d->error_prob, split::criterion_name(cfg_.criterion.criterion),
                   stats::test_name(cfg_.criterion.test)});
  (void)right;
}

std::string QLearningAgent::checkpoint() const {
  nlohmann::json doc = {{"tree", nlohmann::json::parse(tree_.to_text())},
                        {"num_actions", num_actions_},
                        {"gamma", cfg_.gamma},
                        {"alpha", cfg_.alpha},
                        {"q", q_},
                        {"counts", counts_}};
  return doc.dump(2);
}

RunMetrics run_episode(Agent& agent, env::ClusterSim& sim, long steps, Mode mode,
                       std::mt19937_64& rng, std::vector<TracePoint>* trace) {
  RunMetrics metrics;
  const std::size_t journal_before = agent.journal().size();
  Measurement m = sim.current();
  for (long i = 0; i < steps; ++i) {
    const double epsilon = mode == Mode::train ? agent.training_epsilon() : 0.0;
    const int a = agent.act(m, epsilon, rng);
    auto [m_next, reward] = sim.step(a);
    if (mode == Mode::eval) metrics.total_eval_reward += reward;
    if (trace)
      trace->push_back({sim.t(), m_next[1], sim.vms(), a, reward,
                        sim.optimal_static_reward(sim.t()).second});
    if (mode == Mode::train) agent.observe({m, a, m_next, reward}, true);
    m = std::move(m_next);
  }
  const auto& entries = agent.journal().entries();
  for (std::size_t i = journal_before; i < entries.size(); ++i) {
    metrics.splits_total += 1;
    if (is_relevant(entries[i].param)) metrics.splits_correct += 1;
  }
  metrics.final_states = agent.num_states();
  return metrics;
}

void train_offline(Agent& agent, std::span<const Experience> log) {
  for (const Experience& e : log) agent.observe(e, true);
}

}  // namespace mdpdt::agents
