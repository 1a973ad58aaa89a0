#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mdpdt/agents.hpp"
#include "mdpdt/env.hpp"

namespace mdpdt::harness {

struct InvalidConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mean / standard error / median of one metric over replicates. `defined` is
// false when no replicate produced the metric (e.g. accuracy with no splits).
struct MetricStats {
  bool defined = false;
  double mean = 0.0;
  double se = 0.0;
  double median = 0.0;
  int n = 0;
};

MetricStats aggregate(std::vector<double> values);

// A fully resolved experiment definition. Defaults reproduce the simulation
// study setup; every constant the experiments depend on lives here so the
// serialized config is a complete record of a run.
struct ExperimentSpec {
  std::string name = "experiment";
  long train_steps = 5000;
  long eval_steps = 1000;
  int replicates = 20;
  std::uint64_t seed_base = 1;
  int parallel = 1;

  env::SimConfig sim{};
  agents::AgentConfig agent{};

  // sweep: margins x statistical tests
  std::vector<double> margins{0.05, 0.01, 0.002, 0.0005};
  std::vector<stats::TestKind> tests{stats::TestKind::mann_whitney};

  // strategies comparison
  std::vector<split::StrategyConfig> strategies{};

  // initial-tree comparison: (label, grid)
  std::vector<std::pair<std::string, GridSpec>> grids{};

  // agent comparison on offline datasets
  std::vector<std::size_t> dataset_sizes{500, 1000, 20000};
  env::WorkloadProfile dataset_profile{};  // training workload for datasets
  std::vector<std::string> compare_agents{"mdp_dt", "mdp", "qdt", "q_learning"};
  GridSpec static_grid{};       // 96-state baseline partition
  GridSpec dt_initial_tree{};   // small starting partition for the DT agents
};

// Built-in defaults per experiment kind (sweep, strategies, grids, compare).
ExperimentSpec default_spec(const std::string& kind);

// JSON round trip; parse validates and reports the offending field.
ExperimentSpec spec_from_json(const std::string& text);
std::string spec_to_json(const ExperimentSpec& spec);

// Equal partitions of [lo, hi]: k interior boundaries for k+1 bins.
std::vector<double> equal_partition_points(double lo, double hi, int bins);

struct SweepRow {
  std::string test;
  double margin;
  MetricStats reward, splits, accuracy, states;
};

struct LabelRow {
  std::string label;
  MetricStats reward, splits, accuracy, states;
};

struct CompareRow {
  std::string agent;
  std::size_t dataset_size;
  MetricStats reward, states;
  MetricStats vms_variance;  // stability of the sizing decisions per replicate
  std::vector<agents::TracePoint> trace;  // replicate 0
};

// Figs 4-6 analogue: accuracy, split count and evaluation reward as a
// function of the maximum type-I error, one series per statistical test.
std::vector<SweepRow> run_sweep(const ExperimentSpec& spec);

// Fig 7 analogue: splitting-strategy comparison.
std::vector<LabelRow> run_strategies(const ExperimentSpec& spec);

// Figs 8-9 analogue: initial decision-tree size comparison.
std::vector<LabelRow> run_grids(const ExperimentSpec& spec);

// Fig 11 analogue: the four agents trained offline on shared datasets and
// evaluated greedily on identical seeds.
std::vector<CompareRow> run_compare(const ExperimentSpec& spec);

// One train+eval replicate with the given agent config; seeds are derived
// from spec.seed_base + replicate.
agents::RunMetrics run_replicate(const ExperimentSpec& spec,
                                 const agents::AgentConfig& agent_cfg,
                                 int replicate,
                                 std::vector<agents::TracePoint>* trace = nullptr);

// CSV emission. Each writer returns the paths it wrote.
std::vector<std::filesystem::path> write_sweep_csvs(
    const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> write_label_csvs(
    const std::vector<LabelRow>& rows, const std::string& key_column,
    const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> write_compare_csvs(
    const std::vector<CompareRow>& rows, const std::filesystem::path& out_dir);

// Writes a standalone matplotlib script rendering the given CSVs; the
// harness itself renders nothing.
std::filesystem::path emit_plot_script(
    const std::vector<std::filesystem::path>& csv_paths,
    const std::filesystem::path& script_path);

// Runs fn(0..n-1) across up to `threads` workers; rethrows the first failure.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace mdpdt::harness
