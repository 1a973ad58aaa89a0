#include "mdpdt/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace mdpdt::split {

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::parameter_test: return "parameter_test";
    case Criterion::q_value_test_median: return "q_value_test_median";
    case Criterion::q_value_test_multipoint: return "q_value_test_multipoint";
  }
  return "?";
}

Criterion criterion_from_name(const std::string& name) {
  if (name == "parameter_test") return Criterion::parameter_test;
  if (name == "q_value_test_median") return Criterion::q_value_test_median;
  if (name == "q_value_test_multipoint") return Criterion::q_value_test_multipoint;
  throw std::invalid_argument("unknown splitting criterion: " + name);
}

const char* strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::none: return "none";
    case StrategyKind::default_: return "default";
    case StrategyKind::chain: return "chain";
    case StrategyKind::training: return "training";
    case StrategyKind::training_chain: return "training_chain";
    case StrategyKind::reset_chain: return "reset_chain";
    case StrategyKind::reset_chain_multipoint: return "reset_chain_multipoint";
    case StrategyKind::training_chain_reset: return "training_chain_reset";
    case StrategyKind::two_phase: return "two_phase";
  }
  return "?";
}

StrategyKind strategy_from_name(const std::string& name) {
  if (name == "none") return StrategyKind::none;
  if (name == "default") return StrategyKind::default_;
  if (name == "chain") return StrategyKind::chain;
  if (name == "training") return StrategyKind::training;
  if (name == "training_chain") return StrategyKind::training_chain;
  if (name == "reset_chain") return StrategyKind::reset_chain;
  if (name == "reset_chain_multipoint") return StrategyKind::reset_chain_multipoint;
  if (name == "training_chain_reset") return StrategyKind::training_chain_reset;
  if (name == "two_phase") return StrategyKind::two_phase;
  throw std::invalid_argument("unknown splitting strategy: " + name);
}

void SplitJournal::append(Entry entry) {
  if (sink_) {
    (*sink_) << entry.step << '\t' << entry.state << '\t' << entry.param << '\t'
             << entry.point << '\t' << entry.error_prob << '\t' << entry.criterion
             << '\t' << entry.test << '\n';
  }
  entries_.push_back(std::move(entry));
}

namespace {

// Group-size floor per side: the t-family needs 2 values to form a variance,
// the rank/ECDF tests work from 1.
std::size_t min_group_size(stats::TestKind test) {
  return (test == stats::TestKind::student_t || test == stats::TestKind::welch) ? 2
                                                                                : 1;
}

// Runs the configured test, mapping degenerate evidence to "no candidate".
std::optional<double> error_probability(stats::TestKind test,
                                        std::span<const double> lo,
                                        std::span<const double> hi) {
  const std::size_t floor = min_group_size(test);
  if (lo.size() < floor || hi.size() < floor) return std::nullopt;
  try {
    return stats::run_test(test, lo, hi).p_value;
  } catch (const stats::DegenerateVariance&) {
    return std::nullopt;
  } catch (const stats::InsufficientSample&) {
    return std::nullopt;
  }
}

}  // namespace

std::optional<SplitDecision> find_parameter_split(
    std::span<const Experience* const> es,
    const std::function<double(const Experience&)>& q_of, double value_ref,
    const ParameterSpace& space, std::span<const Interval> box,
    const CriterionConfig& cfg, StateId state) {
  if (es.size() < 2) return std::nullopt;

  std::vector<const Experience*> below, above;
  for (const Experience* e : es) {
    (q_of(*e) >= value_ref ? above : below).push_back(e);
  }
  if (below.empty() || above.empty()) return std::nullopt;

  std::optional<SplitDecision> best;
  std::vector<double> lo, hi;
  for (std::size_t p = 0; p < space.size(); ++p) {
    lo.clear();
    hi.clear();
    for (const Experience* e : below) lo.push_back(e->m[p]);
    for (const Experience* e : above) hi.push_back(e->m[p]);
    const auto err = error_probability(cfg.test, lo, hi);
    if (!err) continue;
    if (best && *err >= best->error_prob) continue;  // ties keep earliest param

    const double mean_lo = std::accumulate(lo.begin(), lo.end(), 0.0) /
                           static_cast<double>(lo.size());
    const double mean_hi = std::accumulate(hi.begin(), hi.end(), 0.0) /
                           static_cast<double>(hi.size());
    const double point = 0.5 * (mean_lo + mean_hi);
    if (!(point > box[p].lo && point < box[p].hi)) continue;
    best = SplitDecision{state, p, point, *err};
  }
  if (best && best->error_prob <= cfg.max_type_i_error) return best;
  return std::nullopt;
}

std::optional<SplitDecision> find_q_value_split(
    std::span<const Experience* const> es,
    const std::function<double(const Experience&)>& q_of,
    const ParameterSpace& space, std::span<const Interval> box,
    const CriterionConfig& cfg, StateId state, bool all_points) {
  if (es.size() < 2) return std::nullopt;

  std::vector<double> qvals(es.size());
  for (std::size_t i = 0; i < es.size(); ++i) qvals[i] = q_of(*es[i]);

  const std::size_t n = es.size();
  std::vector<std::size_t> order(n);
  std::optional<SplitDecision> best;
  std::vector<double> q_sorted(n), lo, hi;

  for (std::size_t p = 0; p < space.size(); ++p) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
      return es[i]->m[p] < es[j]->m[p];
    });
    for (std::size_t i = 0; i < n; ++i) q_sorted[i] = qvals[order[i]];

    // Candidate cuts sit between consecutive unequal parameter values; a cut
    // value is the number of experiences left of the boundary.
    std::vector<std::size_t> cuts;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (es[order[i]]->m[p] != es[order[i + 1]]->m[p]) cuts.push_back(i + 1);
    if (cuts.empty()) continue;

    if (!all_points) {
      // Median mode: keep only the cut dividing the experiences most evenly.
      const double half = static_cast<double>(n) / 2.0;
      std::size_t best_cut = cuts.front();
      for (std::size_t c : cuts)
        if (std::fabs(static_cast<double>(c) - half) <
            std::fabs(static_cast<double>(best_cut) - half))
          best_cut = c;
      cuts.assign(1, best_cut);
    }

    for (std::size_t c : cuts) {
      lo.assign(q_sorted.begin(), q_sorted.begin() + static_cast<std::ptrdiff_t>(c));
      hi.assign(q_sorted.begin() + static_cast<std::ptrdiff_t>(c), q_sorted.end());
      const auto err = error_probability(cfg.test, lo, hi);
      if (!err) continue;
      if (best && *err >= best->error_prob) continue;
      const double point = 0.5 * (es[order[c - 1]]->m[p] + es[order[c]]->m[p]);
      if (!(point > box[p].lo && point < box[p].hi)) continue;
      best = SplitDecision{state, p, point, *err};
    }
  }
  if (best && best->error_prob <= cfg.max_type_i_error) return best;
  return std::nullopt;
}

namespace {

// Experiences taken from s with its current optimal action; empty when the
// state has no data.
std::vector<const Experience*> optimal_action_experiences(const MdpModel& model,
                                                          StateId s,
                                                          int* action_out) {
  std::vector<const Experience*> es;
  int a;
  try {
    a = model.optimal_action(s);
  } catch (const NoData&) {
    return es;
  }
  for (const auto& [s2, vec] : model.experiences_from(s))
    for (const auto& se : vec)
      if (se.e.action == a) es.push_back(&se.e);
  if (action_out) *action_out = a;
  return es;
}

}  // namespace

std::optional<SplitDecision> split_parameter_test(const MdpModel& model, StateId s,
                                                  const CriterionConfig& cfg) {
  int a = 0;
  const auto es = optimal_action_experiences(model, s, &a);
  if (es.empty()) return std::nullopt;
  const double value_ref = model.stored_q(s, a);  // the state's current value
  const auto box = model.tree().state_box(s);
  return find_parameter_split(
      es, [&](const Experience& e) { return model.q_value_of_experience(e); },
      value_ref, model.tree().space(), box, cfg, s);
}

std::optional<SplitDecision> split_q_value_test(const MdpModel& model, StateId s,
                                                const CriterionConfig& cfg,
                                                bool all_points) {
  const auto es = optimal_action_experiences(model, s, nullptr);
  if (es.empty()) return std::nullopt;
  const auto box = model.tree().state_box(s);
  return find_q_value_split(
      es, [&](const Experience& e) { return model.q_value_of_experience(e); },
      model.tree().space(), box, cfg, s, all_points);
}

std::optional<SplitDecision> evaluate_criterion(const MdpModel& model, StateId s,
                                                const CriterionConfig& cfg) {
  switch (cfg.criterion) {
    case Criterion::parameter_test:
      return split_parameter_test(model, s, cfg);
    case Criterion::q_value_test_median:
      return split_q_value_test(model, s, cfg, /*all_points=*/false);
    case Criterion::q_value_test_multipoint:
      return split_q_value_test(model, s, cfg, /*all_points=*/true);
  }
  return std::nullopt;
}

void perform_split(MdpModel& model, const SplitDecision& d,
                   const UpdateConfig& update) {
  auto drained = model.drain_state(d.state);
  const auto ids = model.split_tree_state(d.state, d.param,
                                          std::span<const double>(&d.point, 1));
  for (const auto& se : drained) model.replay(se);
  // Both replacement states are retrained against the replayed data.
  if (update.algorithm == UpdateAlgorithm::value_iteration) {
    model.value_iteration(update.vi_tolerance);
  } else {
    for (StateId child : ids) {
      if (update.algorithm == UpdateAlgorithm::single_update)
        model.single_update(child);
      else
        model.prioritized_sweeping(child, update.ps_max_backups, update.ps_threshold);
    }
  }
}

namespace {

void journal_decision(SplitJournal* journal, long step, const MdpModel& model,
                      const SplitDecision& d, const CriterionConfig& cfg) {
  if (!journal) return;
  journal->append({step, d.state, model.tree().space().name(d.param), d.point,
                   d.error_prob, criterion_name(cfg.criterion),
                   stats::test_name(cfg.test)});
}

// Tests every current leaf once, splitting where the criterion fires.
int single_pass(MdpModel& model, const CriterionConfig& cfg,
                const UpdateConfig& update, SplitJournal* journal, long step) {
  int performed = 0;
  const std::size_t snapshot = model.num_states();
  for (StateId s = 0; s < snapshot; ++s) {
    const auto d = evaluate_criterion(model, s, cfg);
    if (!d) continue;
    perform_split(model, *d, update);
    journal_decision(journal, step, model, *d, cfg);
    ++performed;
  }
  return performed;
}

int attempt_default(MdpModel& model, const Experience& last,
                    const CriterionConfig& cfg, const UpdateConfig& update,
                    SplitJournal* journal, long step) {
  const StateId s = model.tree().classify(last.m);
  const auto d = evaluate_criterion(model, s, cfg);
  if (!d) return 0;
  perform_split(model, *d, update);
  journal_decision(journal, step, model, *d, cfg);
  return 1;
}

void reset_and_rebuild(MdpModel& model, const StateIndex& initial_tree) {
  model.rebuild_with_tree(initial_tree);
  // A reset is a global retrain, so restore a consistent value table before
  // splitting resumes.
  model.value_iteration(1e-9);
}

}  // namespace

int chain_split(MdpModel& model, const CriterionConfig& cfg,
                const UpdateConfig& update, SplitJournal* journal, long step) {
  // States created during a pass are only tested on the next full pass.
  int total = 0;
  while (true) {
    const int performed = single_pass(model, cfg, update, journal, step);
    total += performed;
    if (performed == 0) break;
  }
  return total;
}

int apply_strategy(MdpModel& model, long step, const Experience& last,
                   const StrategyConfig& strategy, const CriterionConfig& cfg,
                   const UpdateConfig& update, SplitJournal* journal,
                   const StateIndex& initial_tree) {
  CriterionConfig effective = cfg;
  switch (strategy.kind) {
    case StrategyKind::none:
      return 0;
    case StrategyKind::default_:
      return attempt_default(model, last, effective, update, journal, step);
    case StrategyKind::chain:
      return chain_split(model, effective, update, journal, step);
    case StrategyKind::training:
      if (step <= strategy.n) return 0;
      return attempt_default(model, last, effective, update, journal, step);
    case StrategyKind::training_chain:
      if (step < strategy.n) return 0;
      if (step == strategy.n)
        return chain_split(model, effective, update, journal, step);
      return attempt_default(model, last, effective, update, journal, step);
    case StrategyKind::reset_chain_multipoint:
      effective.criterion = Criterion::q_value_test_multipoint;
      [[fallthrough]];
    case StrategyKind::reset_chain:
      if (strategy.p > 0 && step % strategy.p == 0)
        reset_and_rebuild(model, initial_tree);
      return chain_split(model, effective, update, journal, step);
    case StrategyKind::training_chain_reset:
      if (step < strategy.n) return 0;
      if (step == strategy.n)
        return chain_split(model, effective, update, journal, step);
      if (strategy.p > 0 && (step - strategy.n) % strategy.p == 0) {
        reset_and_rebuild(model, initial_tree);
        return chain_split(model, effective, update, journal, step);
      }
      return 0;
    case StrategyKind::two_phase:
      if (strategy.p > 0 && step % strategy.p == 0)
        return single_pass(model, effective, update, journal, step);
      return 0;
  }
  return 0;
}

}  // namespace mdpdt::split
