#include "mdpdt/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace mdpdt {

const char* update_algorithm_name(UpdateAlgorithm a) {
  switch (a) {
    case UpdateAlgorithm::single_update: return "single_update";
    case UpdateAlgorithm::value_iteration: return "value_iteration";
    case UpdateAlgorithm::prioritized_sweeping: return "prioritized_sweeping";
  }
  return "?";
}

UpdateAlgorithm update_algorithm_from_name(const std::string& name) {
  if (name == "single_update") return UpdateAlgorithm::single_update;
  if (name == "value_iteration") return UpdateAlgorithm::value_iteration;
  if (name == "prioritized_sweeping") return UpdateAlgorithm::prioritized_sweeping;
  throw std::invalid_argument("unknown update algorithm: " + name);
}

MdpModel::MdpModel(StateIndex tree, std::size_t num_actions, double gamma)
    : tree_(std::move(tree)), num_actions_(num_actions), gamma_(gamma) {
  if (num_actions_ == 0) throw std::invalid_argument("model needs at least one action");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0))
    throw std::invalid_argument("discount factor must lie in [0, 1)");
  sync_sizes();
}

void MdpModel::sync_sizes() {
  const std::size_t n = tree_.num_states();
  stats_.resize(n, std::vector<ActionStat>(num_actions_));
  experiences_.resize(n);
  preds_.resize(n);
  v_.resize(n, 0.0);
  q_.resize(n, std::vector<double>(num_actions_, 0.0));
}

void MdpModel::add(const Experience& e, std::uint64_t seq) {
  if (e.action < 0 || static_cast<std::size_t>(e.action) >= num_actions_)
    throw std::invalid_argument("experience action id out of range");
  const StateId s = tree_.classify(e.m);
  const StateId s2 = tree_.classify(e.m_next);
  experiences_[s][s2].push_back({e, seq});
  ActionStat& as = stats_[s][static_cast<std::size_t>(e.action)];
  as.count += 1;
  DestStat& d = as.dests[s2];
  d.transitions += 1;
  d.reward_sum += e.reward;
  preds_[s2].insert(s);
}

void MdpModel::update(const Experience& e) { add(e, next_seq_++); }

double MdpModel::q_value(StateId s, int a) const {
  const ActionStat& as = stats_.at(s).at(static_cast<std::size_t>(a));
  if (as.count == 0)
    throw NeverTried("action " + std::to_string(a) + " never tried from state " +
                     std::to_string(s));
  const double count = static_cast<double>(as.count);
  double q = 0.0;
  for (const auto& [s2, d] : as.dests) {
    const double t = static_cast<double>(d.transitions) / count;
    q += t * (d.reward_sum / static_cast<double>(d.transitions) + gamma_ * v_[s2]);
  }
  return q;
}

double MdpModel::q_value_of_experience(const Experience& e) const {
  const StateId s2 = tree_.classify(e.m_next);
  return e.reward + gamma_ * v_[s2];
}

double MdpModel::stored_q(StateId s, int a) const {
  const ActionStat& as = stats_.at(s).at(static_cast<std::size_t>(a));
  if (as.count == 0)
    throw NeverTried("action " + std::to_string(a) + " never tried from state " +
                     std::to_string(s));
  return q_.at(s).at(static_cast<std::size_t>(a));
}

double MdpModel::backup(StateId s) {
  bool any = false;
  double best = 0.0;
  for (std::size_t a = 0; a < num_actions_; ++a) {
    if (stats_[s][a].count == 0) continue;
    const double q = q_value(s, static_cast<int>(a));
    q_[s][a] = q;
    if (!any || q > best) best = q;
    any = true;
  }
  const double fresh = any ? best : 0.0;
  const double delta = std::fabs(fresh - v_[s]);
  v_[s] = fresh;
  return delta;
}

void MdpModel::single_update(StateId s) { backup(s); }

int MdpModel::value_iteration(double tolerance) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const std::size_t n = num_states();
  int sweeps = 0;
  double delta = tolerance;
  std::vector<double> fresh(n, 0.0);
  while (delta >= tolerance) {
    delta = 0.0;
    for (StateId s = 0; s < n; ++s) {
      bool any = false;
      double best = 0.0;
      for (std::size_t a = 0; a < num_actions_; ++a) {
        if (stats_[s][a].count == 0) continue;
        const double q = q_value(s, static_cast<int>(a));
        q_[s][a] = q;
        if (!any || q > best) best = q;
        any = true;
      }
      fresh[s] = any ? best : 0.0;
      delta = std::max(delta, std::fabs(fresh[s] - v_[s]));
    }
    v_ = fresh;
    ++sweeps;
  }
  return sweeps;
}

void MdpModel::prioritized_sweeping(StateId s, int max_backups, double threshold) {
  if (max_backups <= 0) throw std::invalid_argument("max_backups must be positive");
  std::priority_queue<std::pair<double, StateId>> queue;
  std::map<StateId, double> queued;

  const auto push_preds = [&](StateId u, double delta) {
    if (delta <= threshold) return;
    for (StateId p : preds_[u]) {
      auto it = queued.find(p);
      if (it != queued.end() && it->second >= delta) continue;
      queued[p] = delta;
      queue.emplace(delta, p);
    }
  };

  int backups = 1;
  push_preds(s, backup(s));
  while (!queue.empty() && backups < max_backups) {
    const auto [pri, u] = queue.top();
    queue.pop();
    auto it = queued.find(u);
    if (it == queued.end() || it->second != pri) continue;  // stale entry
    queued.erase(it);
    const double delta = backup(u);
    ++backups;
    push_preds(u, delta);
  }
}

int MdpModel::optimal_action(StateId s) const {
  int best = -1;
  double best_q = 0.0;
  for (std::size_t a = 0; a < num_actions_; ++a) {
    if (stats_.at(s)[a].count == 0) continue;
    if (best < 0 || q_[s][a] > best_q) {
      best = static_cast<int>(a);
      best_q = q_[s][a];
    }
  }
  if (best < 0)
    throw NoData("no action was ever tried from state " + std::to_string(s));
  return best;
}

std::int64_t MdpModel::visit_count(StateId s, int a) const {
  return stats_.at(s).at(static_cast<std::size_t>(a)).count;
}

std::int64_t MdpModel::transition_count(StateId s, int a, StateId s2) const {
  const auto& dests = stats_.at(s).at(static_cast<std::size_t>(a)).dests;
  const auto it = dests.find(s2);
  return it == dests.end() ? 0 : it->second.transitions;
}

double MdpModel::reward_sum(StateId s, int a, StateId s2) const {
  const auto& dests = stats_.at(s).at(static_cast<std::size_t>(a)).dests;
  const auto it = dests.find(s2);
  return it == dests.end() ? 0.0 : it->second.reward_sum;
}

const std::map<StateId, std::vector<MdpModel::StoredExperience>>&
MdpModel::experiences_from(StateId s) const {
  return experiences_.at(s);
}

std::vector<MdpModel::StoredExperience> MdpModel::drain_state(StateId s) {
  std::vector<StoredExperience> drained;

  // Outgoing: the whole row of s.
  for (auto& [s2, vec] : experiences_[s])
    for (auto& se : vec) drained.push_back(std::move(se));
  experiences_[s].clear();
  for (auto& as : stats_[s]) {
    for (const auto& [s2, d] : as.dests) {
      preds_[s2].erase(s);  // may be re-inserted below if s2 also reaches s
    }
    as = ActionStat{};
  }

  // Incoming: the column of s.
  for (StateId p = 0; p < num_states(); ++p) {
    if (p == s) continue;
    auto it = experiences_[p].find(s);
    if (it != experiences_[p].end()) {
      for (auto& se : it->second) drained.push_back(std::move(se));
      experiences_[p].erase(it);
    }
    for (auto& as : stats_[p]) {
      auto dit = as.dests.find(s);
      if (dit != as.dests.end()) {
        as.count -= dit->second.transitions;
        as.dests.erase(dit);
      }
    }
  }
  preds_[s].clear();

  std::sort(drained.begin(), drained.end(),
            [](const StoredExperience& x, const StoredExperience& y) {
              return x.seq < y.seq;
            });
  return drained;
}

std::vector<StateId> MdpModel::split_tree_state(StateId s, std::size_t param,
                                                std::span<const double> points) {
  auto ids = tree_.split_leaf_multi(s, param, points);
  sync_sizes();
  return ids;
}

void MdpModel::replay(const StoredExperience& se) { add(se.e, se.seq); }

void MdpModel::rebuild_with_tree(StateIndex fresh) {
  std::vector<StoredExperience> all;
  for (auto& row : experiences_)
    for (auto& [s2, vec] : row)
      for (auto& se : vec) all.push_back(std::move(se));
  std::sort(all.begin(), all.end(),
            [](const StoredExperience& x, const StoredExperience& y) {
              return x.seq < y.seq;
            });

  tree_ = std::move(fresh);
  stats_.clear();
  experiences_.clear();
  preds_.clear();
  v_.clear();
  q_.clear();
  sync_sizes();
  for (const auto& se : all) add(se.e, se.seq);
}

void apply_update(MdpModel& model, const UpdateConfig& cfg, StateId s) {
  switch (cfg.algorithm) {
    case UpdateAlgorithm::single_update:
      model.single_update(s);
      break;
    case UpdateAlgorithm::value_iteration:
      model.value_iteration(cfg.vi_tolerance);
      break;
    case UpdateAlgorithm::prioritized_sweeping:
      model.prioritized_sweeping(s, cfg.ps_max_backups, cfg.ps_threshold);
      break;
  }
}

namespace {

nlohmann::json measurement_to_named(const Measurement& m, const ParameterSpace& space) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < space.size(); ++i) j[space.name(i)] = m[i];
  return j;
}

Measurement measurement_from_named(const nlohmann::json& j, const ParameterSpace& space) {
  std::map<std::string, double> named;
  for (auto it = j.begin(); it != j.end(); ++it) named[it.key()] = it.value().get<double>();
  return space.from_named(named);
}

}  // namespace

void write_experience_log(std::ostream& out, std::span<const Experience> log,
                          const ParameterSpace& space) {
  for (const Experience& e : log) {
    nlohmann::json j = {{"m", measurement_to_named(e.m, space)},
                        {"a", e.action},
                        {"m_next", measurement_to_named(e.m_next, space)},
                        {"r", e.reward}};
    out << j.dump() << '\n';
  }
}

std::vector<Experience> read_experience_log(std::istream& in,
                                            const ParameterSpace& space) {
  std::vector<Experience> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    log.push_back({measurement_from_named(j.at("m"), space),
                   j.at("a").get<int>(),
                   measurement_from_named(j.at("m_next"), space),
                   j.at("r").get<double>()});
  }
  return log;
}

std::string model_to_text(const MdpModel& model) {
  nlohmann::json tallies = nlohmann::json::array();
  for (StateId s = 0; s < model.num_states(); ++s) {
    for (std::size_t a = 0; a < model.num_actions(); ++a) {
      if (model.visit_count(s, static_cast<int>(a)) == 0) continue;
      nlohmann::json dests = nlohmann::json::array();
      for (StateId s2 = 0; s2 < model.num_states(); ++s2) {
        const std::int64_t t = model.transition_count(s, static_cast<int>(a), s2);
        if (t == 0) continue;
        dests.push_back({{"s2", s2},
                         {"transitions", t},
                         {"reward_sum", model.reward_sum(s, static_cast<int>(a), s2)}});
      }
      tallies.push_back({{"s", s},
                         {"a", a},
                         {"count", model.visit_count(s, static_cast<int>(a))},
                         {"dests", std::move(dests)}});
    }
  }
  nlohmann::json values = nlohmann::json::array();
  nlohmann::json qvals = nlohmann::json::array();
  for (StateId s = 0; s < model.num_states(); ++s) {
    values.push_back(model.value(s));
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t a = 0; a < model.num_actions(); ++a) {
      if (model.visit_count(s, static_cast<int>(a)) == 0) row.push_back(nullptr);
      else row.push_back(model.stored_q(s, static_cast<int>(a)));
    }
    qvals.push_back(std::move(row));
  }
  nlohmann::json doc = {{"tree", nlohmann::json::parse(model.tree().to_text())},
                        {"num_actions", model.num_actions()},
                        {"gamma", model.gamma()},
                        {"tallies", std::move(tallies)},
                        {"v", std::move(values)},
                        {"q", std::move(qvals)}};
  return doc.dump(2);
}

MdpModel model_from_text(const std::string& text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  StateIndex tree = StateIndex::from_text(doc.at("tree").dump());
  MdpModel model(std::move(tree), doc.at("num_actions").get<std::size_t>(),
                 doc.at("gamma").get<double>());
  for (const auto& t : doc.at("tallies")) {
    const StateId s = t.at("s").get<StateId>();
    const std::size_t a = t.at("a").get<std::size_t>();
    MdpModel::ActionStat& as = model.stats_.at(s).at(a);
    as.count = t.at("count").get<std::int64_t>();
    for (const auto& d : t.at("dests")) {
      const StateId s2 = d.at("s2").get<StateId>();
      as.dests[s2] = {d.at("transitions").get<std::int64_t>(),
                      d.at("reward_sum").get<double>()};
      model.preds_.at(s2).insert(s);
      model.next_seq_ += static_cast<std::uint64_t>(as.dests[s2].transitions);
    }
  }
  const auto v = doc.at("v").get<std::vector<double>>();
  if (v.size() != model.num_states())
    throw std::invalid_argument("model checkpoint: value table size mismatch");
  model.v_ = v;
  const auto& q = doc.at("q");
  for (StateId s = 0; s < model.num_states(); ++s)
    for (std::size_t a = 0; a < model.num_actions(); ++a)
      if (!q.at(s).at(a).is_null()) model.q_[s][a] = q.at(s).at(a).get<double>();
  return model;
}

}  // namespace mdpdt
