// Command-line front end for the MDP_DT experiment harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mdpdt/harness.hpp"

namespace fs = std::filesystem;
using namespace mdpdt;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw harness::InvalidConfig("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

harness::ExperimentSpec load_spec(const std::string& kind, const std::string& config,
                                  std::uint64_t seed, int replicates, int parallel) {
  harness::ExperimentSpec spec = config.empty()
                                     ? harness::default_spec(kind)
                                     : harness::spec_from_json(read_file(config));
  if (seed != 0) spec.seed_base = seed;
  if (replicates != 0) spec.replicates = replicates;
  if (parallel != 0) spec.parallel = parallel;
  return spec;
}

// The resolved configuration is always written next to the results so every
// constant that shaped a run is on record.
void record_spec(const harness::ExperimentSpec& spec, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "config.json");
  out << harness::spec_to_json(spec) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MDP_DT: adaptive state-space partitioning for elastic resource "
               "management (simulation study harness)"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int replicates = 0;
  int parallel = 0;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "experiment config (JSON)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the seed base");
    cmd->add_option("--replicates", replicates, "override the replicate count");
    cmd->add_option("--parallel", parallel, "worker threads for replicates");
  };

  auto* sweep = app.add_subcommand(
      "sweep", "accuracy/splits/reward vs. the max type-I error, per test");
  add_common(sweep);
  auto* strategies =
      app.add_subcommand("strategies", "compare splitting strategies");
  add_common(strategies);
  auto* grids =
      app.add_subcommand("grids", "compare initial decision-tree sizes");
  add_common(grids);
  auto* compare = app.add_subcommand(
      "compare", "MDP_DT / MDP / QDT / Q-learning on shared offline datasets");
  add_common(compare);

  auto* dataset = app.add_subcommand("dataset", "generate an experience log");
  std::string dataset_out = "dataset.jsonl";
  std::size_t dataset_n = 1000;
  std::uint64_t dataset_seed = 1;
  std::string dataset_profile;
  dataset->add_option("--config", config, "config supplying the env block");
  dataset->add_option("--out", dataset_out, "output log file (JSONL)");
  dataset->add_option("--n", dataset_n, "number of experiences");
  dataset->add_option("--seed", dataset_seed, "dataset seed");
  dataset->add_option("--profile", dataset_profile,
                      "workload kind override (sinusoid, "
                      "variable_amplitude_sinusoid, slow_sinusoid, square_pulse)");

  auto* train = app.add_subcommand("train", "train an MDP_DT agent offline");
  std::string train_log;
  std::string train_out = "checkpoint.json";
  std::string train_journal;
  train->add_option("--config", config, "config supplying the agent block");
  train->add_option("--log", train_log, "experience log to replay")->required();
  train->add_option("--out", train_out, "checkpoint file to write");
  train->add_option("--journal", train_journal, "split journal file to append");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) {
      auto spec = load_spec("sweep", config, seed, replicates, parallel);
      record_spec(spec, out_dir);
      const auto rows = harness::run_sweep(spec);
      auto csvs = harness::write_sweep_csvs(rows, out_dir);
      harness::emit_plot_script(csvs, fs::path(out_dir) / "plot.py");
      std::cout << "wrote " << csvs.size() << " csv files to " << out_dir << '\n';
    } else if (strategies->parsed()) {
      auto spec = load_spec("strategies", config, seed, replicates, parallel);
      record_spec(spec, out_dir);
      const auto rows = harness::run_strategies(spec);
      auto csvs = harness::write_label_csvs(rows, "strategy", out_dir);
      harness::emit_plot_script(csvs, fs::path(out_dir) / "plot.py");
      std::cout << "wrote " << csvs.size() << " csv files to " << out_dir << '\n';
    } else if (grids->parsed()) {
      auto spec = load_spec("grids", config, seed, replicates, parallel);
      record_spec(spec, out_dir);
      const auto rows = harness::run_grids(spec);
      auto csvs = harness::write_label_csvs(rows, "grid", out_dir);
      harness::emit_plot_script(csvs, fs::path(out_dir) / "plot.py");
      std::cout << "wrote " << csvs.size() << " csv files to " << out_dir << '\n';
    } else if (compare->parsed()) {
      auto spec = load_spec("compare", config, seed, replicates, parallel);
      record_spec(spec, out_dir);
      const auto rows = harness::run_compare(spec);
      auto csvs = harness::write_compare_csvs(rows, out_dir);
      harness::emit_plot_script(csvs, fs::path(out_dir) / "plot.py");
      std::cout << "wrote " << csvs.size() << " csv files to " << out_dir << '\n';
    } else if (dataset->parsed()) {
      auto spec = load_spec("dataset", config, 0, 0, 0);
      if (!dataset_profile.empty())
        spec.sim.profile.kind = env::WorkloadProfile::kind_from_name(dataset_profile);
      std::ofstream out(dataset_out);
      if (!out) throw std::runtime_error("cannot write " + dataset_out);
      env::generate_dataset(spec.sim, dataset_n, dataset_seed, out);
      std::cout << "wrote " << dataset_n << " experiences to " << dataset_out << '\n';
    } else if (train->parsed()) {
      auto spec = load_spec("train", config, 0, 0, 0);
      std::ifstream in(train_log);
      if (!in) throw std::runtime_error("cannot read " + train_log);
      const auto log = read_experience_log(in, env::ClusterSim::make_space());
      agents::MdpDtAgent agent(env::ClusterSim::make_space(),
                               spec.sim.action_deltas.size(), spec.agent);
      std::ofstream journal_out;
      if (!train_journal.empty()) {
        journal_out.open(train_journal, std::ios::app);
        if (!journal_out) throw std::runtime_error("cannot write " + train_journal);
        agent.set_journal_sink(&journal_out);
      }
      agents::train_offline(agent, log);
      std::ofstream out(train_out);
      if (!out) throw std::runtime_error("cannot write " + train_out);
      out << agent.checkpoint() << '\n';
      std::cout << "trained on " << log.size() << " experiences; "
                << agent.num_states() << " states, "
                << agent.journal().size() << " splits; checkpoint: " << train_out
                << '\n';
    }
  } catch (const harness::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
