#include "mdpdt/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace mdpdt::env {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Deterministic across standard libraries, unlike the std distributions.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int hi_inclusive) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(hi_inclusive + 1));
}

}  // namespace

double WorkloadProfile::load(double t) const {
  double value = baseline;
  switch (kind) {
    case Kind::sinusoid:
    case Kind::slow_sinusoid:
      value = baseline + amplitude * std::sin(kTwoPi * t / period);
      break;
    case Kind::variable_amplitude_sinusoid: {
      const double envelope = 0.5 + 0.5 * std::sin(kTwoPi * t / amplitude_period);
      value = baseline + amplitude * envelope * std::sin(kTwoPi * t / period);
      break;
    }
    case Kind::square_pulse: {
      const double phase = t / period - std::floor(t / period);
      value = phase < duty_cycle ? baseline + amplitude : baseline - amplitude;
      break;
    }
  }
  return std::max(value, 0.0);
}

WorkloadProfile::Kind WorkloadProfile::kind_from_name(const std::string& name) {
  if (name == "sinusoid") return Kind::sinusoid;
  if (name == "variable_amplitude_sinusoid") return Kind::variable_amplitude_sinusoid;
  if (name == "slow_sinusoid") return Kind::slow_sinusoid;
  if (name == "square_pulse") return Kind::square_pulse;
  throw std::invalid_argument("unknown workload profile: " + name);
}

const char* WorkloadProfile::kind_name(Kind kind) {
  switch (kind) {
    case Kind::sinusoid: return "sinusoid";
    case Kind::variable_amplitude_sinusoid: return "variable_amplitude_sinusoid";
    case Kind::slow_sinusoid: return "slow_sinusoid";
    case Kind::square_pulse: return "square_pulse";
  }
  return "?";
}

const std::array<const char*, 3> kRelevantParams = {"vms", "load", "read_pct"};

ParameterSpace ClusterSim::make_space() {
  return ParameterSpace(
      {"vms", "load", "read_pct", "noise_u1", "noise_u2", "noise_u3", "noise_u4",
       "noise_d1", "noise_d2", "noise_d3"},
      {ParamKind::discrete_integer, ParamKind::continuous, ParamKind::continuous,
       ParamKind::continuous, ParamKind::continuous, ParamKind::continuous,
       ParamKind::continuous, ParamKind::discrete_integer,
       ParamKind::discrete_integer, ParamKind::discrete_integer});
}

ClusterSim::ClusterSim(SimConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), space_(make_space()), rng_(seed) {
  if (cfg_.action_deltas.empty())
    throw std::invalid_argument("simulator needs at least one action");
  if (cfg_.min_vms < 1 || cfg_.max_vms < cfg_.min_vms)
    throw std::invalid_argument("bad vms bounds");
  reset();
}

double ClusterSim::read_fraction_at(long t) const {
  return cfg_.read_baseline +
         cfg_.read_amplitude * std::sin(kTwoPi * static_cast<double>(t) / cfg_.read_period);
}

double ClusterSim::reward_for(int vms, long t) const {
  const double capacity = cfg_.capacity_per_vm * vms * read_fraction_at(t);
  return std::min(capacity, load_at(t)) - cfg_.vm_cost * vms;
}

Measurement ClusterSim::make_measurement() {
  Measurement m(space_.size());
  m[0] = static_cast<double>(vms_);
  m[1] = load_at(t_);
  m[2] = read_fraction_at(t_);
  for (std::size_t i = 3; i < 7; ++i) m[i] = uniform01(rng_);
  for (std::size_t i = 7; i < 10; ++i) m[i] = static_cast<double>(uniform_int(rng_, 9));
  return m;
}

Measurement ClusterSim::reset() {
  t_ = 0;
  vms_ = std::clamp(cfg_.initial_vms, cfg_.min_vms, cfg_.max_vms);
  current_ = make_measurement();
  return current_;
}

std::pair<Measurement, double> ClusterSim::step(int action_id) {
  const int delta = cfg_.action_deltas.at(static_cast<std::size_t>(action_id));
  t_ += 1;
  vms_ = std::clamp(vms_ + delta, cfg_.min_vms, cfg_.max_vms);
  const double reward = reward_for(vms_, t_);
  current_ = make_measurement();
  return {current_, reward};
}

std::pair<int, double> ClusterSim::optimal_static_reward(long t) const {
  int best_vms = cfg_.min_vms;
  double best = reward_for(cfg_.min_vms, t);
  for (int v = cfg_.min_vms + 1; v <= cfg_.max_vms; ++v) {
    const double r = reward_for(v, t);
    if (r > best) {
      best = r;
      best_vms = v;
    }
  }
  return {best_vms, best};
}

std::vector<Experience> generate_dataset(const SimConfig& cfg, std::size_t n,
                                         std::uint64_t seed) {
  ClusterSim sim(cfg, seed);
  std::mt19937_64 action_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Experience> log;
  log.reserve(n);
  Measurement m = sim.reset();
  for (std::size_t i = 0; i < n; ++i) {
    const int a = uniform_int(action_rng, static_cast<int>(sim.num_actions()) - 1);
    auto [m2, r] = sim.step(a);
    log.push_back({m, a, m2, r});
    m = std::move(m2);
  }
  return log;
}

void generate_dataset(const SimConfig& cfg, std::size_t n, std::uint64_t seed,
                      std::ostream& out) {
  const auto log = generate_dataset(cfg, n, seed);
  write_experience_log(out, log, ClusterSim::make_space());
}

}  // namespace mdpdt::env
