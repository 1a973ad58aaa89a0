#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mdpdt/model.hpp"
#include "oracles.hpp"

using namespace mdpdt;

namespace {

// One discrete parameter "x"; measurements are state indices.
MdpModel chain_model(std::size_t states, std::size_t actions, double gamma) {
  ParameterSpace space({"x"}, {ParamKind::discrete_integer});
  if (states == 1) return MdpModel(StateIndex(space), actions, gamma);
  std::vector<double> points;
  for (std::size_t s = 0; s + 1 < states; ++s)
    points.push_back(static_cast<double>(s) + 0.5);
  return MdpModel(build_grid(space, {{"x", points}}), actions, gamma);
}

Experience exp1(double from, int a, double to, double r) {
  return {{from}, a, {to}, r};
}

}  // namespace

TEST_CASE("update tallies single and split transitions") {
  auto model = chain_model(3, 2, 0.9);
  model.update(exp1(0, 1, 1, 7.0));
  CHECK(model.visit_count(0, 1) == 1);
  CHECK(model.transition_count(0, 1, 1) == 1);
  CHECK(model.reward_sum(0, 1, 1) == 7.0);

  model.update(exp1(0, 0, 1, 1.0));
  model.update(exp1(0, 0, 2, 3.0));
  CHECK(model.visit_count(0, 0) == 2);
  CHECK(model.transition_count(0, 0, 1) == 1);
  CHECK(model.transition_count(0, 0, 2) == 1);
}

TEST_CASE("1000 random experiences match a naive recount of the raw log") {
  std::mt19937_64 rng(3);
  auto model = chain_model(6, 3, 0.9);
  std::vector<Experience> log;
  for (int i = 0; i < 1000; ++i) {
    log.push_back(exp1(static_cast<double>(rng() % 6), static_cast<int>(rng() % 3),
                       static_cast<double>(rng() % 6),
                       static_cast<double>(rng() % 100) / 10.0));
    model.update(log.back());
  }
  for (StateId s = 0; s < 6; ++s)
    for (int a = 0; a < 3; ++a)
      for (StateId s2 = 0; s2 < 6; ++s2) {
        std::int64_t transitions = 0;
        double reward = 0.0;
        for (const auto& e : log)
          if (e.m[0] == static_cast<double>(s) && e.action == a &&
              e.m_next[0] == static_cast<double>(s2)) {
            ++transitions;
            reward += e.reward;
          }
        CHECK(model.transition_count(s, a, s2) == transitions);
        CHECK(model.reward_sum(s, a, s2) == doctest::Approx(reward).epsilon(1e-12));
      }
}

TEST_CASE("q_value: self loop at the fixed point and gamma = 0") {
  auto model = chain_model(1, 1, 0.5);
  model.update(exp1(0, 0, 0, 1.0));
  model.value_iteration(1e-12);
  CHECK(model.value(0) == doctest::Approx(2.0));        // geometric series
  CHECK(model.q_value(0, 0) == doctest::Approx(2.0));   // 1 + 0.5 * 2

  auto flat = chain_model(2, 1, 0.0);
  flat.update(exp1(0, 0, 1, 4.0));
  flat.update(exp1(0, 0, 1, 6.0));
  flat.single_update(0);
  CHECK(flat.q_value(0, 0) == doctest::Approx(5.0));  // empirical mean reward
  CHECK_THROWS_AS(flat.q_value(1, 0), NeverTried);
}

TEST_CASE("q_value matches direct summation on random tallies") {
  std::mt19937_64 rng(5);
  auto model = oracles::random_model(8, 3, 0.8, rng);
  model.value_iteration(1e-10);
  for (StateId s = 0; s < model.num_states(); ++s) {
    for (int a = 0; a < 3; ++a) {
      if (model.visit_count(s, a) == 0) continue;
      double q = 0.0;
      const double count = static_cast<double>(model.visit_count(s, a));
      for (StateId s2 = 0; s2 < model.num_states(); ++s2) {
        const std::int64_t t = model.transition_count(s, a, s2);
        if (t == 0) continue;
        q += static_cast<double>(t) / count *
             (model.reward_sum(s, a, s2) / static_cast<double>(t) +
              model.gamma() * model.value(s2));
      }
      CHECK(model.q_value(s, a) == doctest::Approx(q).epsilon(1e-12));
    }
  }
}

TEST_CASE("q_value_of_experience uses current values") {
  auto model = chain_model(2, 1, 0.85);
  // state 1 self-loop with reward 3: V(1) = 3 / 0.15 = 20
  for (int i = 0; i < 4; ++i) model.update(exp1(1, 0, 1, 3.0));
  model.value_iteration(1e-12);
  CHECK(model.value(1) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(model.q_value_of_experience(exp1(0, 0, 1, 10.0)) ==
        doctest::Approx(27.0).epsilon(1e-9));

  auto flat = chain_model(2, 1, 0.0);
  CHECK(flat.q_value_of_experience(exp1(0, 0, 1, 2.5)) == doctest::Approx(2.5));
}

TEST_CASE("value_iteration: hand-solvable chains") {
  auto model = chain_model(2, 1, 0.5);
  model.update(exp1(0, 0, 1, 0.0));
  model.update(exp1(1, 0, 1, 1.0));
  model.value_iteration(1e-12);
  CHECK(model.value(1) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(model.value(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(model.value_iteration(0.0), std::invalid_argument);
  CHECK_THROWS_AS(MdpModel(StateIndex(ParameterSpace({"x"}, {ParamKind::continuous})),
                           1, 1.0),
                  std::invalid_argument);
}

TEST_CASE("value_iteration matches 10000 brute-force synchronous backups") {
  std::mt19937_64 rng(7);
  auto model = oracles::random_model(30, 5, 0.9, rng);
  model.value_iteration(1e-10);
  const auto brute = oracles::brute_force_values(model, 10000);
  for (StateId s = 0; s < model.num_states(); ++s)
    CHECK(model.value(s) == doctest::Approx(brute[s]).epsilon(1e-6));
}

TEST_CASE("prioritized sweeping: budget one equals a single update") {
  std::mt19937_64 rng(9);
  auto a = oracles::random_model(10, 3, 0.9, rng);
  std::mt19937_64 rng2(9);
  auto b = oracles::random_model(10, 3, 0.9, rng2);
  a.prioritized_sweeping(4, 1, 0.0);
  b.single_update(4);
  for (StateId s = 0; s < a.num_states(); ++s)
    CHECK(a.value(s) == b.value(s));
}

TEST_CASE("prioritized sweeping run to quiescence reaches the VI fixed point") {
  std::mt19937_64 rng(11);
  auto ps = oracles::random_model(20, 4, 0.9, rng);
  std::mt19937_64 rng2(11);
  auto vi = oracles::random_model(20, 4, 0.9, rng2);
  vi.value_iteration(1e-12);

  for (int pass = 0; pass < 200; ++pass) {
    double delta = 0.0;
    for (StateId s = 0; s < ps.num_states(); ++s) {
      const double before = ps.value(s);
      ps.prioritized_sweeping(s, 100000, 1e-12);
      delta = std::max(delta, std::fabs(ps.value(s) - before));
    }
    if (delta < 1e-12) break;
  }
  for (StateId s = 0; s < ps.num_states(); ++s)
    CHECK(ps.value(s) == doctest::Approx(vi.value(s)).epsilon(1e-6));
}

TEST_CASE("prioritized sweeping leaves unrelated components untouched") {
  // two disconnected blocks: states 0-1 and 2-3
  auto model = chain_model(4, 1, 0.5);
  model.update(exp1(0, 0, 1, 0.0));
  model.update(exp1(1, 0, 1, 1.0));
  model.update(exp1(2, 0, 3, 0.0));
  model.update(exp1(3, 0, 3, 1.0));
  model.value_iteration(1e-12);
  const double v2 = model.value(2), v3 = model.value(3);

  // a reward surprise at the sink of the first block
  model.update(exp1(1, 0, 1, 5.0));
  model.prioritized_sweeping(1, 100000, 1e-12);
  CHECK(model.value(2) == v2);  // untouched, bit for bit
  CHECK(model.value(3) == v3);

  auto fresh = chain_model(4, 1, 0.5);
  fresh.update(exp1(0, 0, 1, 0.0));
  fresh.update(exp1(1, 0, 1, 1.0));
  fresh.update(exp1(2, 0, 3, 0.0));
  fresh.update(exp1(3, 0, 3, 1.0));
  fresh.update(exp1(1, 0, 1, 5.0));
  fresh.value_iteration(1e-12);
  CHECK(model.value(0) == doctest::Approx(fresh.value(0)).epsilon(1e-9));
  CHECK(model.value(1) == doctest::Approx(fresh.value(1)).epsilon(1e-9));
}

TEST_CASE("optimal_action: ties break to the lowest action id") {
  auto model = chain_model(2, 3, 0.0);
  model.update(exp1(0, 2, 1, 3.0));
  model.single_update(0);
  CHECK(model.optimal_action(0) == 2);  // only tried action

  model.update(exp1(0, 0, 1, 3.0));
  model.single_update(0);
  CHECK(model.optimal_action(0) == 0);  // tie at 3.0

  CHECK_THROWS_AS(model.optimal_action(1), NoData);
}

TEST_CASE("optimal_action agrees with an exhaustive Q scan") {
  std::mt19937_64 rng(13);
  auto model = oracles::random_model(12, 4, 0.7, rng);
  model.value_iteration(1e-10);
  for (StateId s = 0; s < model.num_states(); ++s) {
    int best = -1;
    double best_q = 0.0;
    for (int a = 0; a < 4; ++a) {
      if (model.visit_count(s, a) == 0) continue;
      const double q = model.q_value(s, a);
      if (best < 0 || q > best_q) {
        best = a;
        best_q = q;
      }
    }
    if (best < 0) continue;
    CHECK(model.optimal_action(s) == best);
  }
}

TEST_CASE("transition probabilities stay normalized") {
  std::mt19937_64 rng(17);
  auto model = oracles::random_model(10, 3, 0.9, rng);
  for (StateId s = 0; s < model.num_states(); ++s)
    for (int a = 0; a < 3; ++a) {
      const std::int64_t count = model.visit_count(s, a);
      if (count == 0) continue;
      double total = 0.0;
      for (StateId s2 = 0; s2 < model.num_states(); ++s2)
        total += static_cast<double>(model.transition_count(s, a, s2)) /
                 static_cast<double>(count);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("values are nondecreasing in gamma when rewards are nonnegative") {
  std::mt19937_64 seed_rng(19);
  const auto seed = seed_rng();
  std::vector<double> gammas{0.0, 0.5, 0.9};
  std::vector<std::vector<double>> values;
  for (double gamma : gammas) {
    std::mt19937_64 rng(seed);
    auto model = oracles::random_model(10, 3, gamma, rng);
    model.value_iteration(1e-10);
    std::vector<double> v(model.num_states());
    for (StateId s = 0; s < model.num_states(); ++s) v[s] = model.value(s);
    values.push_back(std::move(v));
  }
  for (std::size_t g = 1; g < gammas.size(); ++g)
    for (std::size_t s = 0; s < values[g].size(); ++s)
      CHECK(values[g][s] >= values[g - 1][s] - 1e-9);
}

TEST_CASE("argmax is invariant under uniform reward shifts (deterministic models)") {
  // single-destination deterministic transitions; shifting every reward by c
  // moves all Q(s, .) of a state by the same amount
  std::mt19937_64 rng(23);
  for (int round = 0; round < 10; ++round) {
    const double c = 1.0 + static_cast<double>(rng() % 50) / 10.0;
    auto base = chain_model(6, 3, 0.8);
    auto shifted = chain_model(6, 3, 0.8);
    for (StateId s = 0; s < 6; ++s)
      for (int a = 0; a < 3; ++a) {
        const double dest = static_cast<double>(rng() % 6);
        const double r = static_cast<double>(rng() % 100) / 10.0;
        base.update(exp1(static_cast<double>(s), a, dest, r));
        shifted.update(exp1(static_cast<double>(s), a, dest, r + c));
      }
    base.value_iteration(1e-10);
    shifted.value_iteration(1e-10);
    for (StateId s = 0; s < 6; ++s)
      CHECK(base.optimal_action(s) == shifted.optimal_action(s));
  }
}

TEST_CASE("experience log round trip") {
  ParameterSpace space({"x", "y"}, {ParamKind::continuous, ParamKind::continuous});
  std::vector<Experience> log{{{1.5, 2.5}, 0, {3.5, 4.5}, -1.25},
                              {{0.0, 9.0}, 2, {1.0, 8.0}, 0.0}};
  std::stringstream ss;
  write_experience_log(ss, log, space);
  const auto loaded = read_experience_log(ss, space);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0] == log[0]);
  CHECK(loaded[1] == log[1]);
}

TEST_CASE("model checkpoint round trip preserves tallies and values") {
  std::mt19937_64 rng(29);
  auto model = oracles::random_model(6, 2, 0.9, rng);
  model.value_iteration(1e-10);
  const auto text = model_to_text(model);
  const auto loaded = model_from_text(text);
  CHECK(loaded.num_states() == model.num_states());
  CHECK(loaded.gamma() == model.gamma());
  for (StateId s = 0; s < model.num_states(); ++s) {
    CHECK(loaded.value(s) == model.value(s));
    for (int a = 0; a < 2; ++a) {
      CHECK(loaded.visit_count(s, a) == model.visit_count(s, a));
      for (StateId s2 = 0; s2 < model.num_states(); ++s2) {
        CHECK(loaded.transition_count(s, a, s2) == model.transition_count(s, a, s2));
        CHECK(loaded.reward_sum(s, a, s2) == model.reward_sum(s, a, s2));
      }
    }
  }
  CHECK(loaded.optimal_action(0) == model.optimal_action(0));
}
