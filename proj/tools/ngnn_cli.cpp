// Command-line front end: dataset generation, training runs, and the sweep
// protocols, all driven by a single JSON experiment config.
//
// Exit codes: 0 success, 1 runtime failure, 2 config/parse error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ngnn/ngnn.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct GlobalFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> threads;
};

void add_global_flags(CLI::App* cmd, GlobalFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "base seed (overrides config)");
  cmd->add_option("--runs", flags.runs, "number of runs (overrides config)");
  cmd->add_option("--threads", flags.threads, "worker threads for independent runs");
}

ngnn::ExperimentConfig load_config(const GlobalFlags& flags) {
  ngnn::ExperimentConfig cfg = ngnn::load_experiment_config(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.runs) cfg.runs = *flags.runs;
  if (flags.threads) cfg.threads = *flags.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NGNN graph neural network training toolkit"};
  app.require_subcommand(1);

  GlobalFlags train_flags, noise_flags, edge_flags, depth_flags, pos_flags, param_flags,
      synth_flags;

  auto* train = app.add_subcommand("train", "train a model over several seeds");
  add_global_flags(train, train_flags);
  auto* noise = app.add_subcommand("noise-sweep", "feature-noise robustness sweep");
  add_global_flags(noise, noise_flags);
  auto* edge = app.add_subcommand("edge-noise-sweep", "edge-noise robustness sweep");
  add_global_flags(edge, edge_flags);
  auto* depth = app.add_subcommand("depth-sweep", "NGNN depth / hidden width sweep");
  add_global_flags(depth, depth_flags);
  auto* pos = app.add_subcommand("position-sweep", "NGNN position policy sweep");
  add_global_flags(pos, pos_flags);
  auto* param = app.add_subcommand("paramcount", "parameter count with per-layer breakdown");
  add_global_flags(param, param_flags);
  auto* synth = app.add_subcommand("gen-synth", "generate a synthetic SBM dataset");
  add_global_flags(synth, synth_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) {
      const auto cfg = load_config(train_flags);
      const auto aggregate = ngnn::cmd_train(cfg, train_flags.out_dir);
      std::cout << aggregate.dump(2) << std::endl;
    } else if (noise->parsed()) {
      const auto cfg = load_config(noise_flags);
      ngnn::cmd_noise_sweep(cfg, noise_flags.out_dir);
      std::cout << "wrote noise sweep tables to " << noise_flags.out_dir << std::endl;
    } else if (edge->parsed()) {
      const auto cfg = load_config(edge_flags);
      ngnn::cmd_edge_noise_sweep(cfg, edge_flags.out_dir);
      std::cout << "wrote edge noise sweep tables to " << edge_flags.out_dir << std::endl;
    } else if (depth->parsed()) {
      const auto cfg = load_config(depth_flags);
      ngnn::cmd_depth_sweep(cfg, depth_flags.out_dir);
      std::cout << "wrote depth sweep tables to " << depth_flags.out_dir << std::endl;
    } else if (pos->parsed()) {
      const auto cfg = load_config(pos_flags);
      ngnn::cmd_position_sweep(cfg, pos_flags.out_dir);
      std::cout << "wrote position sweep table to " << pos_flags.out_dir << std::endl;
    } else if (param->parsed()) {
      const auto cfg = load_config(param_flags);
      const auto doc = ngnn::cmd_paramcount(cfg);
      std::cout << doc.dump(2) << std::endl;
    } else if (synth->parsed()) {
      std::ifstream in(synth_flags.config_path);
      if (!in) {
        std::cerr << "error: cannot open config file: " << synth_flags.config_path << std::endl;
        return kExitRuntime;
      }
      ngnn::json j;
      try {
        in >> j;
      } catch (const ngnn::json::exception& e) {
        std::cerr << "config error: invalid JSON: " << e.what() << std::endl;
        return kExitConfig;
      }
      ngnn::json spec = j.value("synth", j);
      if (synth_flags.seed) spec["seed"] = *synth_flags.seed;
      const auto manifest = ngnn::cmd_gen_synth(spec, synth_flags.out_dir);
      if (manifest.contains("warning"))
        std::cerr << "warning: " << manifest["warning"].get<std::string>() << std::endl;
      std::cout << manifest.dump(2) << std::endl;
    }
  } catch (const ngnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const ngnn::NgnnSpecError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitOk;
}
