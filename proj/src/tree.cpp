#include "mdpdt/tree.hpp"

#include <algorithm>
#include <limits>

#include <json.hpp>

namespace mdpdt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

StateIndex::StateIndex(ParameterSpace space) : space_(std::move(space)) {
  nodes_.push_back(Node{});  // root leaf, state 0
  leaf_of_state_.push_back(0);
}

StateId StateIndex::classify(const Measurement& m) const {
  space_.check(m);
  int idx = 0;
  while (!nodes_[idx].leaf()) {
    const Node& n = nodes_[idx];
    const double v = m[static_cast<std::size_t>(n.param)];
    // Child = number of points <= v; a value on a split point goes right.
    const auto it = std::upper_bound(n.points.begin(), n.points.end(), v);
    idx = n.children[static_cast<std::size_t>(it - n.points.begin())];
  }
  return nodes_[idx].state;
}

int StateIndex::leaf_node_of(StateId s) const {
  if (s >= leaf_of_state_.size())
    throw NotALeaf("state " + std::to_string(s) + " was never issued");
  return leaf_of_state_[s];
}

Interval StateIndex::state_interval(StateId s, std::size_t param) const {
  Interval iv{-kInf, kInf};
  int idx = leaf_node_of(s);
  int parent = nodes_[idx].parent;
  while (parent >= 0) {
    const Node& p = nodes_[parent];
    if (p.param == static_cast<int>(param)) {
      const auto& ch = p.children;
      const std::size_t pos = static_cast<std::size_t>(
          std::find(ch.begin(), ch.end(), idx) - ch.begin());
      if (pos > 0) iv.lo = std::max(iv.lo, p.points[pos - 1]);
      if (pos < p.points.size()) iv.hi = std::min(iv.hi, p.points[pos]);
    }
    idx = parent;
    parent = nodes_[idx].parent;
  }
  return iv;
}

std::vector<Interval> StateIndex::state_box(StateId s) const {
  std::vector<Interval> box(space_.size(), Interval{-kInf, kInf});
  int idx = leaf_node_of(s);
  int parent = nodes_[idx].parent;
  while (parent >= 0) {
    const Node& p = nodes_[parent];
    const auto& ch = p.children;
    const std::size_t pos = static_cast<std::size_t>(
        std::find(ch.begin(), ch.end(), idx) - ch.begin());
    auto& iv = box[static_cast<std::size_t>(p.param)];
    if (pos > 0) iv.lo = std::max(iv.lo, p.points[pos - 1]);
    if (pos < p.points.size()) iv.hi = std::min(iv.hi, p.points[pos]);
    idx = parent;
    parent = nodes_[idx].parent;
  }
  return box;
}

std::vector<StateId> StateIndex::split_leaf_multi(StateId s, std::size_t param,
                                                  std::span<const double> points) {
  if (param >= space_.size())
    throw MissingParameter("split parameter index out of range");
  if (points.empty()) throw NonIncreasingPoints("no split points given");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (!(points[i - 1] < points[i]))
      throw NonIncreasingPoints("split points must be strictly increasing");

  const int node = leaf_node_of(s);
  const Interval iv = state_interval(s, param);
  for (double p : points)
    if (!(p > iv.lo && p < iv.hi))
      throw PointOutOfRegion("split point " + std::to_string(p) +
                             " is not strictly inside the leaf interval of " +
                             space_.name(param));

  Node& n = nodes_[node];
  n.param = static_cast<int>(param);
  n.points.assign(points.begin(), points.end());
  n.children.clear();

  std::vector<StateId> ids;
  ids.reserve(points.size() + 1);
  for (std::size_t i = 0; i <= points.size(); ++i) {
    Node child;
    child.parent = node;
    child.state = (i == 0) ? s : leaf_of_state_.size();
    const int child_idx = static_cast<int>(nodes_.size());
    if (i == 0) {
      leaf_of_state_[s] = child_idx;
    } else {
      leaf_of_state_.push_back(child_idx);
    }
    ids.push_back(child.state);
    nodes_.push_back(child);
    nodes_[node].children.push_back(child_idx);
  }
  return ids;
}

std::pair<StateId, StateId> StateIndex::split_leaf(StateId s, std::size_t param,
                                                   double point) {
  const auto ids = split_leaf_multi(s, param, std::span<const double>(&point, 1));
  return {ids[0], ids[1]};
}

std::string StateIndex::to_text() const {
  // Render bottom-up so the output is a single nested document.
  std::vector<nlohmann::json> rendered(nodes_.size());
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.leaf()) {
      rendered[i] = {{"kind", "leaf"}, {"state", n.state}};
    } else {
      nlohmann::json children = nlohmann::json::array();
      for (int c : n.children) children.push_back(rendered[static_cast<std::size_t>(c)]);
      rendered[i] = {{"kind", "decision"},
                     {"param", space_.name(static_cast<std::size_t>(n.param))},
                     {"points", n.points},
                     {"children", std::move(children)}};
    }
  }
  nlohmann::json names = nlohmann::json::array();
  nlohmann::json kinds = nlohmann::json::array();
  for (std::size_t i = 0; i < space_.size(); ++i) {
    names.push_back(space_.name(i));
    kinds.push_back(space_.kind(i) == ParamKind::discrete_integer ? "discrete_integer"
                                                                  : "continuous");
  }
  nlohmann::json doc = {{"space", {{"names", names}, {"kinds", kinds}}},
                        {"root", rendered[0]}};
  return doc.dump(2);
}

StateIndex StateIndex::from_text(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  const auto names = doc.at("space").at("names").get<std::vector<std::string>>();
  const auto kind_names = doc.at("space").at("kinds").get<std::vector<std::string>>();
  std::vector<ParamKind> kinds;
  kinds.reserve(kind_names.size());
  for (const auto& k : kind_names)
    kinds.push_back(k == "discrete_integer" ? ParamKind::discrete_integer
                                            : ParamKind::continuous);
  StateIndex index(ParameterSpace(names, kinds));
  index.nodes_.clear();
  index.leaf_of_state_.clear();

  // Recorded state ids are preserved verbatim; they need not follow any
  // particular order, only form a bijection with 0..n-1.
  const auto build = [&](auto&& self, const nlohmann::json& j, int parent) -> int {
    const int idx = static_cast<int>(index.nodes_.size());
    index.nodes_.push_back(Node{});
    index.nodes_[idx].parent = parent;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "leaf") {
      const StateId s = j.at("state").get<StateId>();
      if (s >= index.leaf_of_state_.size()) index.leaf_of_state_.resize(s + 1, -1);
      if (index.leaf_of_state_[s] != -1)
        throw std::invalid_argument("tree checkpoint: duplicate state id " +
                                    std::to_string(s));
      index.leaf_of_state_[s] = idx;
      index.nodes_[idx].state = s;
      return idx;
    }
    if (kind != "decision")
      throw std::invalid_argument("tree checkpoint: unknown node kind " + kind);
    const std::size_t param = index.space_.require(j.at("param").get<std::string>());
    auto points = j.at("points").get<std::vector<double>>();
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i - 1] < points[i]))
        throw NonIncreasingPoints("tree checkpoint: split points not increasing");
    const auto& children = j.at("children");
    if (children.size() != points.size() + 1)
      throw std::invalid_argument("tree checkpoint: children/points mismatch");
    index.nodes_[idx].param = static_cast<int>(param);
    index.nodes_[idx].points = std::move(points);
    for (const auto& c : children) {
      const int child = self(self, c, idx);  // may reallocate nodes_
      index.nodes_[idx].children.push_back(child);
    }
    return idx;
  };
  build(build, doc.at("root"), -1);
  for (std::size_t s = 0; s < index.leaf_of_state_.size(); ++s)
    if (index.leaf_of_state_[s] == -1)
      throw std::invalid_argument("tree checkpoint: state id gap at " +
                                  std::to_string(s));
  return index;
}

bool StateIndex::operator==(const StateIndex& other) const {
  if (!(space_ == other.space_)) return false;
  if (leaf_of_state_.size() != other.leaf_of_state_.size()) return false;
  return to_text() == other.to_text();
}

StateIndex build_grid(const ParameterSpace& space, const GridSpec& spec) {
  StateIndex index(space);
  for (const auto& [name, boundaries] : spec) {
    const std::size_t param = space.require(name);
    if (boundaries.empty())
      throw NonIncreasingPoints("grid boundaries for " + name + " are empty");
    const std::size_t n = index.num_states();
    for (StateId s = 0; s < n; ++s) index.split_leaf_multi(s, param, boundaries);
  }
  return index;
}

}  // namespace mdpdt
