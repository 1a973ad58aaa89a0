#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mdpdt/model.hpp"
#include "mdpdt/space.hpp"

namespace mdpdt::env {

// Incoming-load generator. All kinds share the baseline/amplitude/period
// parameters; loads are clamped at zero.
struct WorkloadProfile {
  enum class Kind { sinusoid, variable_amplitude_sinusoid, slow_sinusoid, square_pulse };

  Kind kind = Kind::sinusoid;
  double baseline = 50.0;
  double amplitude = 50.0;
  double period = 250.0;
  double amplitude_period = 1000.0;  // envelope period (variable amplitude)
  double duty_cycle = 0.5;           // fraction of the period spent high (square pulse)

  double load(double t) const;

  static Kind kind_from_name(const std::string& name);
  static const char* kind_name(Kind kind);
};

struct SimConfig {
  WorkloadProfile profile{};
  std::vector<int> action_deltas{-1, 0, 1};
  int min_vms = 1;
  int max_vms = 20;
  int initial_vms = 1;
  double capacity_per_vm = 10.0;
  double vm_cost = 3.0;
  double read_baseline = 0.75;
  double read_amplitude = 0.25;
  double read_period = 340.0;
};

// Parameters whose values actually drive the reward; splits on anything else
// count as incorrect in the accuracy metric.
extern const std::array<const char*, 3> kRelevantParams;

// The simulated elastic cluster: a VM pool serving a time-varying load, with
// the reward trading served load against VM cost. Measurements carry the
// cluster size, load and read fraction plus seven pure-noise dimensions
// (four uniform reals in [0,1], three uniform integers in [0,9]).
class ClusterSim {
 public:
  ClusterSim(SimConfig cfg, std::uint64_t seed);

  static ParameterSpace make_space();

  const ParameterSpace& space() const { return space_; }
  const SimConfig& config() const { return cfg_; }
  std::size_t num_actions() const { return cfg_.action_deltas.size(); }

  // Restarts time; returns the measurement at t = 0.
  Measurement reset();
  // Applies the action, advances time, returns the new measurement and the
  // reward evaluated at the post-action step.
  std::pair<Measurement, double> step(int action_id);

  const Measurement& current() const { return current_; }
  long t() const { return t_; }
  int vms() const { return vms_; }

  double load_at(long t) const { return cfg_.profile.load(static_cast<double>(t)); }
  double read_fraction_at(long t) const;
  // Reward of holding `vms` machines at step t.
  double reward_for(int vms, long t) const;

  // Best static cluster size at step t and its reward, by exhaustive scan
  // over the legal sizes (ties resolve to the smallest cluster).
  std::pair<int, double> optimal_static_reward(long t) const;

 private:
  Measurement make_measurement();

  SimConfig cfg_;
  ParameterSpace space_;
  std::mt19937_64 rng_;
  long t_ = 0;
  int vms_ = 1;
  Measurement current_;
};

// Collects n experiences under uniformly random actions and writes them in
// the experience-log format; fully determined by the seed.
std::vector<Experience> generate_dataset(const SimConfig& cfg, std::size_t n,
                                         std::uint64_t seed);
void generate_dataset(const SimConfig& cfg, std::size_t n, std::uint64_t seed,
                      std::ostream& out);

}  // namespace mdpdt::env
