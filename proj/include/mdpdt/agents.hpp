#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mdpdt/env.hpp"
#include "mdpdt/model.hpp"
#include "mdpdt/split.hpp"

namespace mdpdt::agents {

struct AgentConfig {
  double gamma = 0.85;
  double alpha = 0.1;    // learning rate, model-free agents only
  double epsilon = 0.3;  // exploration during training
  UpdateConfig update{};
  split::CriterionConfig criterion{};
  split::StrategyConfig strategy{};
  GridSpec initial_tree{};  // empty -> single root
};

struct RunMetrics {
  double total_eval_reward = 0.0;
  long splits_total = 0;
  long splits_correct = 0;
  std::size_t final_states = 0;
};

struct TracePoint {
  long t;
  double load;
  int vms;
  int action;
  double reward;
  double optimal_reward;  // best static cluster size at this step
};

// Common surface of the four compared agents. Acting is e-greedy over the
// agent's current policy; observing runs the agent's model/value/split
// machinery on one experience.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual const ParameterSpace& space() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t num_states() const = 0;
  virtual double training_epsilon() const = 0;
  virtual int act(const Measurement& m, double epsilon, std::mt19937_64& rng) = 0;
  virtual void observe(const Experience& e, bool allow_splits) = 0;
  virtual const split::SplitJournal& journal() const = 0;
  virtual split::SplitJournal& journal() = 0;
  virtual std::string checkpoint() const = 0;

  // Mirrors every future journal entry to the given text stream.
  void set_journal_sink(std::ostream* sink) { journal().set_sink(sink); }
};

// Full-model agent over an adaptively partitioned state space. With an
// initial grid and strategy "none" this is exactly the static-grid MDP
// baseline: same model machinery, splitting disabled.
class MdpDtAgent : public Agent {
 public:
  MdpDtAgent(const ParameterSpace& space, std::size_t num_actions, AgentConfig cfg);

  const ParameterSpace& space() const override { return model_.tree().space(); }
  std::size_t num_actions() const override { return model_.num_actions(); }
  std::size_t num_states() const override { return model_.num_states(); }
  double training_epsilon() const override { return cfg_.epsilon; }

  int select_action(StateId s, double epsilon, std::mt19937_64& rng);
  int act(const Measurement& m, double epsilon, std::mt19937_64& rng) override;
  void observe(const Experience& e, bool allow_splits) override;

  const split::SplitJournal& journal() const override { return journal_; }
  split::SplitJournal& journal() override { return journal_; }
  std::string checkpoint() const override;

  const MdpModel& model() const { return model_; }
  MdpModel& model() { return model_; }
  long steps_observed() const { return step_; }

 private:
  AgentConfig cfg_;
  StateIndex initial_tree_;
  MdpModel model_;
  split::SplitJournal journal_;
  long step_ = 0;
};

// Tabular Q-learning over the tree partition. With splitting enabled this is
// the QDT agent: when its criterion fires it splits the leaf, seeds both
// children with the parent's Q row, and discards the experiences that
// justified the split.
class QLearningAgent : public Agent {
 public:
  QLearningAgent(const ParameterSpace& space, std::size_t num_actions,
                 AgentConfig cfg, bool enable_splits);

  const ParameterSpace& space() const override { return tree_.space(); }
  std::size_t num_actions() const override { return num_actions_; }
  std::size_t num_states() const override { return tree_.num_states(); }
  double training_epsilon() const override { return cfg_.epsilon; }

  int select_action(StateId s, double epsilon, std::mt19937_64& rng);
  int act(const Measurement& m, double epsilon, std::mt19937_64& rng) override;
  void observe(const Experience& e, bool allow_splits) override;

  // The one-step update Q <- (1-alpha) Q + alpha (r + gamma max Q').
  void q_learning_update(StateId s, int a, double r, StateId s_next);

  const split::SplitJournal& journal() const override { return journal_; }
  split::SplitJournal& journal() override { return journal_; }
  std::string checkpoint() const override;

  const StateIndex& tree() const { return tree_; }
  double q(StateId s, int a) const { return q_.at(s).at(static_cast<std::size_t>(a)); }
  std::size_t buffered_experiences(StateId s) const { return buffers_.at(s).size(); }

 private:
  void attempt_split(const Experience& e);

  AgentConfig cfg_;
  std::size_t num_actions_;
  bool enable_splits_;
  StateIndex tree_;
  std::vector<std::vector<double>> q_;
  std::vector<std::vector<std::int64_t>> counts_;
  std::vector<std::vector<Experience>> buffers_;  // per-leaf, QDT only
  split::SplitJournal journal_;
  long step_ = 0;
};

enum class Mode { train, eval };

// The sense-act-update loop: classify, select (e-greedy when training,
// greedy when evaluating), step the environment, and in training mode feed
// the experience through the agent. Evaluation never mutates the agent.
RunMetrics run_episode(Agent& agent, env::ClusterSim& sim, long steps, Mode mode,
                       std::mt19937_64& rng,
                       std::vector<TracePoint>* trace = nullptr);

// Replays a recorded experience log through the agent's update/value/split
// machinery exactly as if experienced online, without acting.
void train_offline(Agent& agent, std::span<const Experience> log);

}  // namespace mdpdt::agents
