#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mdpdt/space.hpp"

namespace mdpdt {

using StateId = std::size_t;

struct NotALeaf : std::logic_error {
  using std::logic_error::logic_error;
};
struct PointOutOfRegion : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NonIncreasingPoints : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Half-open interval [lo, hi); unbounded sides use +-infinity.
struct Interval {
  double lo;
  double hi;
  bool contains(double v) const { return v >= lo && v < hi; }
};

// Per-parameter boundary lists for building a pre-partitioned grid tree.
using GridSpec = std::vector<std::pair<std::string, std::vector<double>>>;

// The decision tree that maps measurements to states.
//
// Leaves carry state ids; decision nodes test one parameter against an
// increasing list of split points (k points -> k+1 children, a value equal
// to a point goes right). State ids are stable: when a leaf splits, the
// leftmost child keeps the old id and the remaining children are appended
// at the end of the state vector, so the id space only ever grows and a
// valid id always addresses a leaf.
class StateIndex {
 public:
  explicit StateIndex(ParameterSpace space);

  const ParameterSpace& space() const { return space_; }
  std::size_t num_states() const { return leaf_of_state_.size(); }

  StateId classify(const Measurement& m) const;

  // Splits leaf s on one interior point; returns (left, right) where left
  // reuses id s and right is the newly appended id.
  std::pair<StateId, StateId> split_leaf(StateId s, std::size_t param, double point);

  // Splits leaf s on k strictly increasing interior points into k+1 leaves;
  // the first keeps id s, the rest are appended in order.
  std::vector<StateId> split_leaf_multi(StateId s, std::size_t param,
                                        std::span<const double> points);

  // The region of state s projected onto one parameter.
  Interval state_interval(StateId s, std::size_t param) const;
  // Full box of state s, one interval per parameter.
  std::vector<Interval> state_box(StateId s) const;

  // Plain-text (JSON) checkpoint of the whole tree.
  std::string to_text() const;
  static StateIndex from_text(const std::string& text);

  bool operator==(const StateIndex& other) const;

 private:
  struct Node {
    int parent = -1;
    int param = -1;                 // -1 marks a leaf
    std::vector<double> points;     // decision only, strictly increasing
    std::vector<int> children;      // decision only, points.size() + 1
    StateId state = 0;              // leaf only
    bool leaf() const { return param < 0; }
  };

  int leaf_node_of(StateId s) const;

  ParameterSpace space_;
  std::vector<Node> nodes_;
  std::vector<int> leaf_of_state_;  // state id -> node index
};

// Builds a tree whose leaves form the Cartesian grid of the given boundary
// lists; leaf count is the product of (boundaries + 1) over parameters.
StateIndex build_grid(const ParameterSpace& space, const GridSpec& spec);

}  // namespace mdpdt
