#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdpdt/model.hpp"
#include "mdpdt/stats.hpp"

namespace mdpdt::split {

enum class Criterion { parameter_test, q_value_test_median, q_value_test_multipoint };

const char* criterion_name(Criterion c);
Criterion criterion_from_name(const std::string& name);

struct CriterionConfig {
  Criterion criterion = Criterion::parameter_test;
  stats::TestKind test = stats::TestKind::mann_whitney;
  double max_type_i_error = 0.002;
};

struct SplitDecision {
  StateId state = 0;
  std::size_t param = 0;
  double point = 0.0;
  double error_prob = 1.0;
};

enum class StrategyKind {
  none,
  default_,
  chain,
  training,
  training_chain,
  reset_chain,
  reset_chain_multipoint,
  training_chain_reset,
  two_phase,
};

const char* strategy_name(StrategyKind k);
StrategyKind strategy_from_name(const std::string& name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::default_;
  long n = 0;  // training length, where applicable
  long p = 0;  // reset / processing period, where applicable
};

// Append-only record of every split performed, consumed by the harness
// accuracy metric. Optionally mirrors each entry to a text sink.
class SplitJournal {
 public:
  struct Entry {
    long step;
    StateId state;
    std::string param;
    double point;
    double error_prob;
    std::string criterion;
    std::string test;
  };

  void append(Entry entry);
  void set_sink(std::ostream* sink) { sink_ = sink; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
  std::ostream* sink_ = nullptr;
};

// --- criterion cores -------------------------------------------------------
// These operate on plain samples so both the full-model agent and the
// decision-tree Q-learning agent can share them. `es` are the experiences
// taken with the optimal action from the leaf under test, `q_of` evaluates an
// experience against the caller's current values, and `box` is the leaf's
// region (candidate points must fall strictly inside it).

std::optional<SplitDecision> find_parameter_split(
    std::span<const Experience* const> es,
    const std::function<double(const Experience&)>& q_of, double value_ref,
    const ParameterSpace& space, std::span<const Interval> box,
    const CriterionConfig& cfg, StateId state);

std::optional<SplitDecision> find_q_value_split(
    std::span<const Experience* const> es,
    const std::function<double(const Experience&)>& q_of,
    const ParameterSpace& space, std::span<const Interval> box,
    const CriterionConfig& cfg, StateId state, bool all_points);

// --- model-based entry points ---------------------------------------------

// Parameter test (optimal-action experiences partitioned around the state's
// current value, per-parameter two-sample tests on the measurements).
std::optional<SplitDecision> split_parameter_test(const MdpModel& model, StateId s,
                                                  const CriterionConfig& cfg);

// Q-value test (experiences sorted per parameter, two-sample tests on the
// q-values either side of candidate midpoints).
std::optional<SplitDecision> split_q_value_test(const MdpModel& model, StateId s,
                                                const CriterionConfig& cfg,
                                                bool all_points);

// Dispatch on cfg.criterion.
std::optional<SplitDecision> evaluate_criterion(const MdpModel& model, StateId s,
                                                const CriterionConfig& cfg);

// Executes a decided split: zeroes the tallies touching the state, splits the
// leaf, replays the drained experiences through the model under the new tree,
// and refreshes both children with the configured update algorithm.
void perform_split(MdpModel& model, const SplitDecision& d, const UpdateConfig& update);

// One full pass of the chain strategy driver: repeatedly test every leaf,
// splitting as long as a pass performs at least one split. Returns splits.
int chain_split(MdpModel& model, const CriterionConfig& cfg,
                const UpdateConfig& update, SplitJournal* journal, long step);

// Applies the configured splitting strategy for one decision step (1-based).
// `initial_tree` is what reset-based strategies restart from. Returns splits.
int apply_strategy(MdpModel& model, long step, const Experience& last,
                   const StrategyConfig& strategy, const CriterionConfig& cfg,
                   const UpdateConfig& update, SplitJournal* journal,
                   const StateIndex& initial_tree);

}  // namespace mdpdt::split
