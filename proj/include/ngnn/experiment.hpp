#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ngnn/checkpoint.hpp"
#include "ngnn/dataset.hpp"
#include "ngnn/model.hpp"
#include "ngnn/perturb.hpp"
#include "ngnn/synth.hpp"
#include "ngnn/train.hpp"

namespace ngnn {

using json = nlohmann::json;

/// Configuration / schema problems; the CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { node_class, link_pred };

inline const char* to_string(Task t) {
  return t == Task::node_class ? "node_class" : "link_pred";
}

inline Task task_from_string(std::string_view s) {
  if (s == "node_class") return Task::node_class;
  if (s == "link_pred") return Task::link_pred;
  throw ConfigError("task: expected \"node_class\" or \"link_pred\"");
}

inline void to_json(json& j, const TrainConfig& c) {
  j = json{{"method", to_string(c.method)},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"fanouts", c.fanouts},
           {"num_clusters", c.num_clusters},
           {"optimizer", c.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd"},
           {"lr", c.optimizer.lr},
           {"beta1", c.optimizer.beta1},
           {"beta2", c.optimizer.beta2},
           {"eps", c.optimizer.eps},
           {"eval_every", c.eval_every},
           {"hits_k", c.hits_k}};
}

inline void from_json(const json& j, TrainConfig& c) {
  c.method = train_method_from_string(j.value("method", std::string("full_graph")));
  c.epochs = j.value("epochs", std::size_t(100));
  c.batch_size = j.value("batch_size", std::size_t(0));
  c.fanouts = j.value("fanouts", std::vector<std::int64_t>{});
  c.num_clusters = j.value("num_clusters", std::size_t(0));
  const std::string opt = j.value("optimizer", std::string("adam"));
  if (opt == "adam") c.optimizer.kind = OptimizerKind::adam;
  else if (opt == "sgd") c.optimizer.kind = OptimizerKind::sgd;
  else throw ConfigError("train.optimizer: expected \"adam\" or \"sgd\"");
  c.optimizer.lr = j.value("lr", 3e-3);
  c.optimizer.beta1 = j.value("beta1", 0.9);
  c.optimizer.beta2 = j.value("beta2", 0.999);
  c.optimizer.eps = j.value("eps", 1e-8);
  c.eval_every = j.value("eval_every", std::size_t(1));
  c.hits_k = j.value("hits_k", std::size_t(50));
}

struct SweepConfig {
  enum class Axis { none, feature_add, feature_concat, edge_noise, ngnn_depth, position };
  Axis axis = Axis::none;
  std::vector<double> sigmas;
  std::vector<double> ratios;
  std::vector<std::size_t> depths;
  std::vector<NgnnPosition> positions;
  std::vector<std::size_t> hidden;  // optional width grid for the depth sweep
};

struct VariantSpec {
  std::string name;
  json model_overrides;  // merged over the base model config
};

struct ExperimentConfig {
  Task task = Task::node_class;
  std::filesystem::path dataset_dir;
  json model_json;  // raw, so sweep/variant overrides can be merged before parsing
  TrainConfig train;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  SweepConfig sweep;
  std::vector<VariantSpec> variants;  // empty = command-specific defaults
};

inline ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ExperimentConfig cfg;
  try {
    cfg.task = task_from_string(j.value("task", std::string("node_class")));
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      if (!d.is_object() || !d.contains("dir"))
        throw ConfigError("dataset: expected an object with a \"dir\" path");
      cfg.dataset_dir = d.at("dir").get<std::string>();
    }
    if (j.contains("model")) {
      cfg.model_json = j.at("model");
      if (!cfg.model_json.is_object()) throw ConfigError("model: expected a JSON object");
      if (!cfg.model_json.contains("arch")) throw ConfigError("model.arch: required");
      if (cfg.model_json.contains("inter_layer_activation") &&
          cfg.model_json.at("inter_layer_activation") != "relu")
        throw ConfigError("model.inter_layer_activation: only \"relu\" is supported");
    }
    if (j.contains("train")) cfg.train = j.at("train").get<TrainConfig>();
    cfg.runs = j.value("runs", std::size_t(10));
    if (cfg.runs < 1) throw ConfigError("runs: must be >= 1");
    cfg.seed = j.value("seed", std::uint64_t(0));
    cfg.threads = j.value("threads", std::size_t(1));
    if (cfg.threads < 1) throw ConfigError("threads: must be >= 1");

    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (!s.is_object()) throw ConfigError("sweep: expected a JSON object");
      std::size_t axes = 0;
      if (s.contains("feature_add")) {
        cfg.sweep.axis = SweepConfig::Axis::feature_add;
        cfg.sweep.sigmas = s.at("feature_add").get<std::vector<double>>();
        ++axes;
      }
      if (s.contains("feature_concat")) {
        cfg.sweep.axis = SweepConfig::Axis::feature_concat;
        cfg.sweep.sigmas = s.at("feature_concat").get<std::vector<double>>();
        ++axes;
      }
      if (s.contains("edge_noise")) {
        cfg.sweep.axis = SweepConfig::Axis::edge_noise;
        cfg.sweep.ratios = s.at("edge_noise").get<std::vector<double>>();
        ++axes;
      }
      if (s.contains("ngnn_depth")) {
        cfg.sweep.axis = SweepConfig::Axis::ngnn_depth;
        cfg.sweep.depths = s.at("ngnn_depth").get<std::vector<std::size_t>>();
        ++axes;
      }
      if (s.contains("position")) {
        cfg.sweep.axis = SweepConfig::Axis::position;
        for (const auto& p : s.at("position"))
          cfg.sweep.positions.push_back(position_from_string(p.get<std::string>()));
        ++axes;
      }
      if (axes != 1)
        throw ConfigError("sweep: exactly one sweep axis per invocation (found " +
                          std::to_string(axes) + ")");
      if (s.contains("hidden")) {
        if (cfg.sweep.axis != SweepConfig::Axis::ngnn_depth)
          throw ConfigError("sweep.hidden: only valid alongside ngnn_depth");
        cfg.sweep.hidden = s.at("hidden").get<std::vector<std::size_t>>();
      }
    }
    if (j.contains("variants")) {
      for (const auto& v : j.at("variants")) {
        VariantSpec spec;
        spec.name = v.at("name").get<std::string>();
        spec.model_overrides = v.value("model", json::object());
        cfg.variants.push_back(std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_experiment_config(j);
}

/// One sweep row: aggregate metric over `runs` seeds plus bookkeeping.
struct ResultRow {
  json sweep_value;  // number or string
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t params = 0;
  double epoch_s = 0.0;
};

struct ResultTable {
  std::string variant;
  json metadata;
  std::vector<ResultRow> rows;
};

inline json table_to_json(const ResultTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back(json{{"sweep_value", r.sweep_value},
                        {"mean", r.mean},
                        {"std", r.stddev},
                        {"params", r.params},
                        {"epoch_s", r.epoch_s}});
  return json{{"variant", t.variant}, {"metadata", t.metadata}, {"rows", rows}};
}

inline std::string table_to_csv(const ResultTable& t) {
  std::string out = "sweep_value,mean,std,params,epoch_s\n";
  for (const auto& r : t.rows) {
    out += r.sweep_value.dump() + ',' + json(r.mean).dump() + ',' + json(r.stddev).dump() + ',' +
           json(r.params).dump() + ',' + json(r.epoch_s).dump() + '\n';
  }
  return out;
}

namespace detail {

inline std::string hash_hex(const json& j) {
  const std::uint64_t h = fnv1a64(j.dump());
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

inline json desk_scale_note() {
  return json{{"desk_scale", true},
              {"note", "metrics reflect the configured desk-scale dataset; parameter counts, "
                       "determinism and trends are the meaningful outputs"}};
}

/// Mean and sample standard deviation.
inline std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// Runs fn(run_index) for run_index in [0, runs), fanning out over up to
/// `threads` workers. Each run is isolated; results land in index order.
inline void for_each_run(std::size_t runs, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || runs <= 1) {
    for (std::size_t r = 0; r < runs; ++r) fn(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= runs) return;
      fn(r);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t k = std::min(threads, runs);
  pool.reserve(k);
  for (std::size_t i = 0; i < k; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Resolves the effective model config for one run: variant overrides merged
/// over the base, dimensions derived from the data when unspecified.
inline ModelConfig resolve_model(const ExperimentConfig& cfg, const json& overrides,
                                 std::size_t feature_dim, std::size_t out_dim) {
  if (cfg.model_json.is_null()) throw ConfigError("model: required for this command");
  json mj = cfg.model_json;
  if (!overrides.empty()) mj.update(overrides);
  ModelConfig m;
  try {
    m = mj.get<ModelConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (m.in_dim == 0) m.in_dim = feature_dim;
  else if (feature_dim != 0 && m.in_dim != feature_dim)
    throw ConfigError("model.in_dim: does not match the (possibly perturbed) feature width " +
                      std::to_string(feature_dim));
  if (m.out_dim == 0) m.out_dim = out_dim;
  if (m.ngnn_position != NgnnPosition::none) {
    try {
      parse_ngnn_spec(m.ngnn_spec);
    } catch (const NgnnSpecError& e) {
      throw ConfigError(std::string("model.ngnn_spec: ") + e.what());
    }
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return m;
}

inline json run_result_json(const RunResult& r, const std::string& config_hash) {
  const EpochTimeStats st = epoch_time_stats(r.epoch_seconds);
  return json{{"config_hash", config_hash},
              {"seed", r.seed},
              {"epochs", r.epochs_run},
              {"curves",
               {{"train_loss", r.train_loss},
                {"eval_epochs", r.eval_epochs},
                {"valid_metric", r.valid_curve}}},
              {"best_valid", r.best_valid},
              {"test_metric", r.test_metric},
              {"epoch_seconds",
               {{"mean", st.mean}, {"std", st.stddev}, {"per_epoch", r.epoch_seconds}}},
              {"param_count", r.param_count}};
}

/// A dataset variant for one run: node data with the run's perturbation
/// applied. Feature noise never touches the graph; edge noise never touches
/// features.
struct RunDataset {
  NodeDataset node;
  Graph normalized;  // gcn view of node.graph, built on demand
  bool has_normalized = false;
};

namespace detail {

inline NodeDataset perturbed_dataset(const NodeDataset& base, SweepConfig::Axis axis,
                                     double value, std::uint64_t run_seed) {
  NodeDataset d;
  d.labels = base.labels;
  d.train_ids = base.train_ids;
  d.valid_ids = base.valid_ids;
  d.test_ids = base.test_ids;
  RngStream noise(RngStream(run_seed).split("noise"));
  switch (axis) {
    case SweepConfig::Axis::feature_add: {
      d.graph = base.graph;
      RngStream r = noise.split("feature");
      d.features = perturb_features_add(base.features, value, r);
      break;
    }
    case SweepConfig::Axis::feature_concat: {
      d.graph = base.graph;
      RngStream r = noise.split("feature");
      d.features = perturb_features_concat(base.features, value, r);
      break;
    }
    case SweepConfig::Axis::edge_noise: {
      d.features = base.features;
      RngStream r = noise.split("edge");
      d.graph = perturb_edges(base.graph, value, r);
      break;
    }
    default:
      d.graph = base.graph;
      d.features = base.features;
      break;
  }
  return d;
}

template <class TrainFn>
ResultRow aggregate_runs(const ExperimentConfig& cfg, const TrainFn& one_run, json sweep_value) {
  std::vector<double> metrics(cfg.runs);
  std::vector<double> epoch_means(cfg.runs);
  std::vector<std::size_t> params(cfg.runs);
  for_each_run(cfg.runs, cfg.threads, [&](std::size_t r) {
    RunResult res = one_run(cfg.seed + r);
    metrics[r] = res.test_metric;
    epoch_means[r] = epoch_time_stats(res.epoch_seconds).mean;
    params[r] = res.param_count;
  });
  ResultRow row;
  row.sweep_value = std::move(sweep_value);
  const auto [mean, stddev] = mean_std(metrics);
  row.mean = mean;
  row.stddev = stddev;
  row.params = params.empty() ? 0 : params.front();
  double esum = 0.0;
  for (double e : epoch_means) esum += e;
  row.epoch_s = epoch_means.empty() ? 0.0 : esum / static_cast<double>(epoch_means.size());
  return row;
}

}  // namespace detail

inline NodeDataset load_node_data(const ExperimentConfig& cfg) {
  if (cfg.dataset_dir.empty()) throw ConfigError("dataset.dir: required for this command");
  return load_node_dataset(DatasetPaths::node_layout(cfg.dataset_dir));
}

inline LinkDataset load_link_data(const ExperimentConfig& cfg) {
  if (cfg.dataset_dir.empty()) throw ConfigError("dataset.dir: required for this command");
  return load_link_dataset(DatasetPaths::link_layout(cfg.dataset_dir));
}

/// Trains one run on a ready dataset (normalizing for GCN as needed).
inline RunResult execute_node_run(const NodeDataset& data, ModelConfig mcfg, TrainConfig tcfg,
                                  std::uint64_t run_seed) {
  tcfg.seed = run_seed;
  if (mcfg.arch == Arch::gcn && !data.graph.normalized()) {
    NodeDataset normalized = data;
    normalized.graph = gcn_normalize(data.graph);
    return train_node_classifier(normalized, mcfg, tcfg);
  }
  return train_node_classifier(data, mcfg, tcfg);
}

inline RunResult execute_link_run(const LinkDataset& data, ModelConfig mcfg, TrainConfig tcfg,
                                  std::uint64_t run_seed) {
  tcfg.seed = run_seed;
  if (mcfg.arch == Arch::gcn && !data.graph.normalized()) {
    LinkDataset normalized = data;
    normalized.graph = gcn_normalize(data.graph);
    return train_link_predictor(normalized, mcfg, tcfg);
  }
  return train_link_predictor(data, mcfg, tcfg);
}

/// `train` command: runs seeds seed..seed+runs-1, writes one JSON per run
/// plus an aggregate. Returns the aggregate document.
inline json cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<json> run_docs(cfg.runs);
  std::vector<double> metrics(cfg.runs), best_valids(cfg.runs);
  std::size_t param_count = 0;

  if (cfg.task == Task::node_class) {
    const NodeDataset data = load_node_data(cfg);
    const ModelConfig mcfg = resolve_model(cfg, json::object(), data.features.cols(),
                                           data.num_classes());
    const std::string hash = detail::hash_hex(
        json{{"task", to_string(cfg.task)}, {"model", json(mcfg)}, {"train", json(cfg.train)}});
    detail::for_each_run(cfg.runs, cfg.threads, [&](std::size_t r) {
      RunResult res = execute_node_run(data, mcfg, cfg.train, cfg.seed + r);
      run_docs[r] = run_result_json(res, hash);
      metrics[r] = res.test_metric;
      best_valids[r] = res.best_valid;
      if (r == 0) param_count = res.param_count;
    });
  } else {
    const LinkDataset data = load_link_data(cfg);
    const ModelConfig mcfg =
        resolve_model(cfg, json::object(), data.features.cols(), /*out_dim=*/0);
    const std::string hash = detail::hash_hex(
        json{{"task", to_string(cfg.task)}, {"model", json(mcfg)}, {"train", json(cfg.train)}});
    detail::for_each_run(cfg.runs, cfg.threads, [&](std::size_t r) {
      RunResult res = execute_link_run(data, mcfg, cfg.train, cfg.seed + r);
      run_docs[r] = run_result_json(res, hash);
      metrics[r] = res.test_metric;
      best_valids[r] = res.best_valid;
      if (r == 0) param_count = res.param_count;
    });
  }

  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    seeds.push_back(cfg.seed + r);
    std::ofstream out(out_dir / ("run_" + std::to_string(cfg.seed + r) + ".json"));
    out << run_docs[r].dump(2) << '\n';
  }
  const auto [mean, stddev] = detail::mean_std(metrics);
  const auto [vmean, vstd] = detail::mean_std(best_valids);
  json aggregate{{"command", "train"},
                 {"metadata", detail::desk_scale_note()},
                 {"runs", cfg.runs},
                 {"seeds", seeds},
                 {"test_metric", {{"mean", mean}, {"std", stddev}}},
                 {"best_valid", {{"mean", vmean}, {"std", vstd}}},
                 {"param_count", param_count}};
  std::ofstream out(out_dir / "aggregate.json");
  out << aggregate.dump(2) << '\n';
  return aggregate;
}

namespace detail {

inline std::vector<VariantSpec> default_variants(SweepConfig::Axis axis) {
  std::vector<VariantSpec> v;
  v.push_back({"baseline", json::object()});
  if (axis == SweepConfig::Axis::feature_add || axis == SweepConfig::Axis::feature_concat) {
    v.push_back({"wide-2x", json{{"hidden_scale", 2}}});
    v.push_back({"deep-plus1", json{{"layer_delta", 1}}});
  }
  v.push_back({"ngnn-1", json{{"ngnn_position", "all"}, {"ngnn_spec", "1-relu"}}});
  v.push_back({"ngnn-2", json{{"ngnn_position", "all"}, {"ngnn_spec", "2-relu"}}});
  return v;
}

/// Expands the synthetic override keys (hidden_scale / layer_delta) against
/// the base model json, leaving only real ModelConfig fields.
inline json expand_overrides(const json& base_model, const json& overrides) {
  json out = overrides;
  if (out.contains("hidden_scale")) {
    const std::size_t scale = out.at("hidden_scale").get<std::size_t>();
    out.erase("hidden_scale");
    out["hidden_dim"] = base_model.value("hidden_dim", std::size_t(0)) * scale;
  }
  if (out.contains("layer_delta")) {
    const std::size_t delta = out.at("layer_delta").get<std::size_t>();
    out.erase("layer_delta");
    out["num_layers"] = base_model.value("num_layers", std::size_t(2)) + delta;
  }
  return out;
}

}  // namespace detail

/// Shared noise-sweep driver for the feature and edge axes. One table per
/// model variant; rows are sweep values; noise is drawn fresh per run from
/// the run seed only, so variants see identical perturbations (paired seeds).
inline std::vector<ResultTable> run_noise_sweep(const ExperimentConfig& cfg,
                                                const std::filesystem::path& out_dir,
                                                const char* command) {
  if (cfg.task != Task::node_class)
    throw ConfigError("sweep: noise sweeps require task == node_class");
  const bool edge = cfg.sweep.axis == SweepConfig::Axis::edge_noise;
  if (edge && cfg.sweep.ratios.empty()) throw ConfigError("sweep.edge_noise: empty value list");
  if (!edge && cfg.sweep.sigmas.empty()) throw ConfigError("sweep: empty sigma list");

  std::filesystem::create_directories(out_dir);
  const NodeDataset base = load_node_data(cfg);
  const std::vector<double>& values = edge ? cfg.sweep.ratios : cfg.sweep.sigmas;
  std::vector<VariantSpec> variants =
      cfg.variants.empty() ? detail::default_variants(cfg.sweep.axis) : cfg.variants;

  std::vector<ResultTable> tables;
  for (const VariantSpec& variant : variants) {
    ResultTable table;
    table.variant = variant.name;
    table.metadata = detail::desk_scale_note();
    table.metadata["command"] = command;
    table.metadata["runs"] = cfg.runs;
    table.metadata["base_seed"] = cfg.seed;
    const json overrides = detail::expand_overrides(cfg.model_json, variant.model_overrides);
    for (double value : values) {
      auto one_run = [&](std::uint64_t run_seed) {
        NodeDataset d = detail::perturbed_dataset(base, cfg.sweep.axis, value, run_seed);
        const ModelConfig mcfg = resolve_model(cfg, overrides, d.features.cols(),
                                               d.num_classes());
        return execute_node_run(d, mcfg, cfg.train, run_seed);
      };
      table.rows.push_back(detail::aggregate_runs(cfg, one_run, json(value)));
    }
    tables.push_back(std::move(table));
  }

  // Per-variant degradation from the first sweep value, and the gap against
  // the first (baseline) variant.
  json gaps = json::object();
  for (const auto& t : tables) {
    json deg = json::array();
    for (const auto& row : t.rows) deg.push_back(t.rows.front().mean - row.mean);
    gaps[t.variant] = deg;
  }
  json gap_vs_first = json::object();
  for (std::size_t i = 1; i < tables.size(); ++i) {
    json g = json::array();
    for (std::size_t k = 0; k < tables[i].rows.size(); ++k) {
      const double deg_base = tables[0].rows.front().mean - tables[0].rows[k].mean;
      const double deg_this = tables[i].rows.front().mean - tables[i].rows[k].mean;
      g.push_back(deg_base - deg_this);
    }
    gap_vs_first[tables[i].variant] = g;
  }

  json doc{{"command", command},
           {"metadata", detail::desk_scale_note()},
           {"sweep_values", values},
           {"degradation", gaps},
           {"gap_vs_" + tables.front().variant, gap_vs_first},
           {"tables", json::object()}};
  for (const auto& t : tables) {
    doc["tables"][t.variant] = table_to_json(t);
    std::ofstream csv(out_dir / (std::string(command) + "_" + t.variant + ".csv"));
    csv << table_to_csv(t);
  }
  std::ofstream out(out_dir / (std::string(command) + ".json"));
  out << doc.dump(2) << '\n';
  return tables;
}

inline std::vector<ResultTable> cmd_noise_sweep(const ExperimentConfig& cfg,
                                                const std::filesystem::path& out_dir) {
  if (cfg.sweep.axis != SweepConfig::Axis::feature_add &&
      cfg.sweep.axis != SweepConfig::Axis::feature_concat)
    throw ConfigError("noise-sweep: sweep axis must be feature_add or feature_concat");
  return run_noise_sweep(cfg, out_dir, "noise_sweep");
}

inline std::vector<ResultTable> cmd_edge_noise_sweep(const ExperimentConfig& cfg,
                                                     const std::filesystem::path& out_dir) {
  if (cfg.sweep.axis != SweepConfig::Axis::edge_noise)
    throw ConfigError("edge-noise-sweep: sweep axis must be edge_noise");
  return run_noise_sweep(cfg, out_dir, "edge_noise_sweep");
}

/// Depth sweep: rows over NGNN depth k (k = 0 is the vanilla baseline),
/// optionally crossed with a hidden-width grid (one table per width).
inline std::vector<ResultTable> cmd_depth_sweep(const ExperimentConfig& cfg,
                                                const std::filesystem::path& out_dir) {
  if (cfg.sweep.axis != SweepConfig::Axis::ngnn_depth)
    throw ConfigError("depth-sweep: sweep axis must be ngnn_depth");
  if (cfg.sweep.depths.empty()) throw ConfigError("sweep.ngnn_depth: empty value list");
  if (cfg.task != Task::node_class) throw ConfigError("depth-sweep: requires task == node_class");
  std::filesystem::create_directories(out_dir);
  const NodeDataset base = load_node_data(cfg);

  std::vector<std::size_t> widths = cfg.sweep.hidden;
  if (widths.empty()) widths.push_back(cfg.model_json.value("hidden_dim", std::size_t(0)));

  const std::string base_position = cfg.model_json.value("ngnn_position", std::string("hidden"));
  std::vector<ResultTable> tables;
  json doc{{"command", "depth_sweep"},
           {"metadata", detail::desk_scale_note()},
           {"tables", json::object()}};
  for (std::size_t width : widths) {
    ResultTable table;
    table.variant = "h" + std::to_string(width);
    table.metadata = detail::desk_scale_note();
    table.metadata["hidden_dim"] = width;
    table.metadata["runs"] = cfg.runs;
    table.metadata["base_seed"] = cfg.seed;
    for (std::size_t k : cfg.sweep.depths) {
      json overrides{{"hidden_dim", width}};
      if (k == 0) {
        overrides["ngnn_position"] = "none";
        overrides["ngnn_spec"] = "";
      } else {
        overrides["ngnn_position"] =
            base_position == "none" ? std::string("hidden") : base_position;
        overrides["ngnn_spec"] = std::to_string(k) + "-relu";
      }
      auto one_run = [&](std::uint64_t run_seed) {
        const ModelConfig mcfg =
            resolve_model(cfg, overrides, base.features.cols(), base.num_classes());
        return execute_node_run(base, mcfg, cfg.train, run_seed);
      };
      table.rows.push_back(detail::aggregate_runs(cfg, one_run, json(k)));
    }
    doc["tables"][table.variant] = table_to_json(table);
    std::ofstream csv(out_dir / ("depth_sweep_" + table.variant + ".csv"));
    csv << table_to_csv(table);
    tables.push_back(std::move(table));
  }
  std::ofstream out(out_dir / "depth_sweep.json");
  out << doc.dump(2) << '\n';
  return tables;
}

/// Position sweep: one row per policy in {none, input, hidden, output, all},
/// all rows trained with identical seeds for paired comparison.
inline std::vector<ResultTable> cmd_position_sweep(const ExperimentConfig& cfg,
                                                   const std::filesystem::path& out_dir) {
  if (cfg.sweep.axis != SweepConfig::Axis::position)
    throw ConfigError("position-sweep: sweep axis must be position");
  if (cfg.sweep.positions.empty()) throw ConfigError("sweep.position: empty value list");
  if (cfg.task != Task::node_class)
    throw ConfigError("position-sweep: requires task == node_class");
  if (cfg.model_json.value("ngnn_spec", std::string()).empty())
    throw ConfigError("model.ngnn_spec: required for a position sweep");
  std::filesystem::create_directories(out_dir);
  const NodeDataset base = load_node_data(cfg);

  ResultTable table;
  table.variant = "position";
  table.metadata = detail::desk_scale_note();
  table.metadata["runs"] = cfg.runs;
  table.metadata["base_seed"] = cfg.seed;
  for (NgnnPosition pos : cfg.sweep.positions) {
    json overrides{{"ngnn_position", to_string(pos)}};
    if (pos == NgnnPosition::none) overrides["ngnn_spec"] = "";
    auto one_run = [&](std::uint64_t run_seed) {
      const ModelConfig mcfg =
          resolve_model(cfg, overrides, base.features.cols(), base.num_classes());
      return execute_node_run(base, mcfg, cfg.train, run_seed);
    };
    table.rows.push_back(detail::aggregate_runs(cfg, one_run, json(to_string(pos))));
  }
  json doc{{"command", "position_sweep"},
           {"metadata", detail::desk_scale_note()},
           {"tables", {{table.variant, table_to_json(table)}}}};
  std::ofstream csv(out_dir / "position_sweep.csv");
  csv << table_to_csv(table);
  std::ofstream out(out_dir / "position_sweep.json");
  out << doc.dump(2) << '\n';
  return {table};
}

/// Parameter counting without data: requires explicit in_dim/out_dim.
inline json cmd_paramcount(const ExperimentConfig& cfg) {
  const ModelConfig mcfg = resolve_model(cfg, json::object(), 0, 0);
  if (mcfg.in_dim == 0 || mcfg.out_dim == 0)
    throw ConfigError("model.in_dim / model.out_dim: required for paramcount");
  Model<float> model = build_model<float>(mcfg, RngStream(0));
  json breakdown = json::array();
  std::size_t total = 0;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const auto& layer = model.layers()[i];
    const std::size_t gnn =
        std::visit([](const auto& l) { return layer_param_count(l); }, layer.impl);
    const std::size_t block = layer_param_count(layer.block);
    breakdown.push_back(json{{"layer", i},
                             {"gnn_params", gnn},
                             {"ngnn_params", block},
                             {"ngnn_depth", layer.block.depth()}});
    total += gnn + block;
  }
  return json{{"command", "paramcount"},
              {"model", json(mcfg)},
              {"total", total},
              {"per_layer", breakdown}};
}

/// gen-synth: writes a synthetic SBM dataset in the on-disk layout. Returns
/// a manifest describing what was written. Warns (via the returned manifest
/// and stderr) when q >= p.
inline json cmd_gen_synth(const json& spec_json, const std::filesystem::path& out_dir) {
  SynthSpec spec;
  try {
    spec.num_nodes = spec_json.value("num_nodes", spec.num_nodes);
    spec.feature_dim = spec_json.value("feature_dim", spec.feature_dim);
    spec.num_classes = spec_json.value("num_classes", spec.num_classes);
    spec.p_intra = spec_json.value("p_intra", spec.p_intra);
    spec.q_inter = spec_json.value("q_inter", spec.q_inter);
    spec.mean_separation = spec_json.value("mean_separation", spec.mean_separation);
    spec.train_frac = spec_json.value("train_frac", spec.train_frac);
    spec.valid_frac = spec_json.value("valid_frac", spec.valid_frac);
    spec.seed = spec_json.value("seed", spec.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  const Task task = task_from_string(spec_json.value("task", std::string("node_class")));

  std::filesystem::create_directories(out_dir);
  json manifest{{"command", "gen_synth"},
                {"out_dir", out_dir.string()},
                {"task", to_string(task)},
                {"num_nodes", spec.num_nodes},
                {"feature_dim", spec.feature_dim},
                {"num_classes", spec.num_classes},
                {"seed", spec.seed}};
  if (!spec.structurally_informative())
    manifest["warning"] = "q_inter >= p_intra: classes are not learnable from structure";

  if (task == Task::node_class) {
    NodeDataset d = gen_synth(spec);
    save_node_dataset(d, DatasetPaths::node_layout(out_dir));
    manifest["num_undirected_edges"] = d.graph.num_undirected_edges();
  } else {
    LinkDataset d = gen_synth_link(spec, spec_json.value("negatives_per_split", std::size_t(0)));
    save_link_dataset(d, DatasetPaths::link_layout(out_dir));
    manifest["num_undirected_edges"] = d.graph.num_undirected_edges();
    manifest["valid_pos"] = d.valid_pos.size();
    manifest["test_pos"] = d.test_pos.size();
  }
  std::ofstream out(out_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace ngnn
