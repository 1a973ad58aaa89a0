#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "mdpdt/space.hpp"
#include "mdpdt/tree.hpp"

namespace mdpdt {

// One observed transition, kept in raw measurement form so it survives any
// later re-partitioning of the state space.
struct Experience {
  Measurement m;
  int action = 0;
  Measurement m_next;
  double reward = 0.0;

  bool operator==(const Experience&) const = default;
};

struct NeverTried : std::logic_error {
  using std::logic_error::logic_error;
};
struct NoData : std::logic_error {
  using std::logic_error::logic_error;
};

enum class UpdateAlgorithm { single_update, value_iteration, prioritized_sweeping };

const char* update_algorithm_name(UpdateAlgorithm a);
UpdateAlgorithm update_algorithm_from_name(const std::string& name);

// How to refresh state values after an experience or a split.
struct UpdateConfig {
  UpdateAlgorithm algorithm = UpdateAlgorithm::prioritized_sweeping;
  double vi_tolerance = 1e-6;
  int ps_max_backups = 1000;
  double ps_threshold = 1e-5;
};

// The full MDP model over the current tree partition: per-(state, action)
// transition counts and reward sums, the retained experiences they were
// tallied from, and the state/Q value tables.
class MdpModel {
 public:
  struct DestStat {
    std::int64_t transitions = 0;
    double reward_sum = 0.0;
  };
  struct ActionStat {
    std::int64_t count = 0;
    std::map<StateId, DestStat> dests;
  };
  struct StoredExperience {
    Experience e;
    std::uint64_t seq = 0;  // arrival order, preserved across splits
  };

  MdpModel(StateIndex tree, std::size_t num_actions, double gamma);

  const StateIndex& tree() const { return tree_; }
  double gamma() const { return gamma_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t num_states() const { return tree_.num_states(); }

  // UpdateMDPModel: classify both endpoints, store the experience and bump
  // the transition/reward tallies.
  void update(const Experience& e);

  // Q(s,a) recomputed from tallies against the current V; throws NeverTried
  // when the action has never been taken from s.
  double q_value(StateId s, int a) const;

  // r + gamma * V(state(m')), against the current tree and current values.
  double q_value_of_experience(const Experience& e) const;

  double value(StateId s) const { return v_.at(s); }
  // Cached Q as of the last refresh of s; throws NeverTried for untried actions.
  double stored_q(StateId s, int a) const;

  // Recomputes Q(s, .) from tallies and sets V(s); touches no other state.
  void single_update(StateId s);

  // Synchronous Bellman sweeps until max |dV| < tolerance; returns sweeps.
  int value_iteration(double tolerance);

  // Backs up s, then propagates along predecessor links in priority order
  // until the queue drains, priorities drop to the threshold, or the backup
  // budget is exhausted.
  void prioritized_sweeping(StateId s, int max_backups, double threshold = 1e-5);

  // Argmax of Q(s, .) over tried actions, ties to the lowest action id;
  // throws NoData when nothing was tried from s.
  int optimal_action(StateId s) const;

  std::int64_t visit_count(StateId s, int a) const;
  std::int64_t transition_count(StateId s, int a, StateId s2) const;
  double reward_sum(StateId s, int a, StateId s2) const;
  const std::map<StateId, std::vector<StoredExperience>>& experiences_from(StateId s) const;
  std::int64_t total_experiences() const { return static_cast<std::int64_t>(next_seq_); }

  // --- split support -------------------------------------------------------
  // Removes and returns (in arrival order) every experience into or out of s,
  // zeroing the corresponding tallies in both directions.
  std::vector<StoredExperience> drain_state(StateId s);
  // Splits the leaf in the underlying tree and grows the state-indexed
  // tables; returns the ids of the new leaves (first one reuses s).
  std::vector<StateId> split_tree_state(StateId s, std::size_t param,
                                        std::span<const double> points);
  // Re-adds a drained experience under the current tree, keeping its
  // original arrival order.
  void replay(const StoredExperience& se);

  // Discards the current partition, classifies every retained experience
  // under the fresh tree, and rebuilds tallies from scratch in arrival order.
  void rebuild_with_tree(StateIndex fresh);

 private:
  friend MdpModel model_from_text(const std::string& text);

  double backup(StateId s);  // refresh Q(s,.) and V(s); returns |dV|
  void add(const Experience& e, std::uint64_t seq);
  void sync_sizes();

  StateIndex tree_;
  std::size_t num_actions_;
  double gamma_;
  std::uint64_t next_seq_ = 0;

  std::vector<std::vector<ActionStat>> stats_;  // [state][action]
  std::vector<std::map<StateId, std::vector<StoredExperience>>> experiences_;  // by source
  std::vector<std::set<StateId>> preds_;  // states with any transition into s
  std::vector<double> v_;
  std::vector<std::vector<double>> q_;
};

// UpdateModelValues: applies the configured update algorithm after an
// experience or split touching state s.
void apply_update(MdpModel& model, const UpdateConfig& cfg, StateId s);

// Line-delimited experience log: one JSON object per line with the named
// measurement maps, action id and reward.
void write_experience_log(std::ostream& out, std::span<const Experience> log,
                          const ParameterSpace& space);
std::vector<Experience> read_experience_log(std::istream& in,
                                            const ParameterSpace& space);

// Model checkpoint (tree + tally tables + value tables) as one JSON document.
std::string model_to_text(const MdpModel& model);
MdpModel model_from_text(const std::string& text);

}  // namespace mdpdt
