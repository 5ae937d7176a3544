#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ngnn/experiment.hpp"
#include "ngnn/synth.hpp"

using ngnn::ExperimentConfig;
using ngnn::json;
using ngnn::SweepConfig;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ngnn_exp_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

/// Writes a small learnable dataset and returns a ready base config.
json write_tiny_dataset(const std::filesystem::path& dir, std::uint64_t seed = 5,
                        std::size_t feature_dim = 6) {
  ngnn::SynthSpec spec;
  spec.num_nodes = 200;
  spec.feature_dim = feature_dim;
  spec.p_intra = 0.08;
  spec.q_inter = 0.005;
  spec.seed = seed;
  auto d = ngnn::gen_synth(spec);
  ngnn::save_node_dataset(d, ngnn::DatasetPaths::node_layout(dir));
  return json{{"task", "node_class"},
              {"dataset", {{"dir", dir.string()}}},
              {"model",
               {{"arch", "sage"}, {"hidden_dim", 8}, {"num_layers", 2}}},
              {"train", {{"epochs", 3}, {"eval_every", 3}, {"lr", 0.01}}},
              {"runs", 2},
              {"seed", 100}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ExperimentConfig, RejectsMalformedDocuments) {
  EXPECT_THROW(ngnn::parse_experiment_config(json::array()), ngnn::ConfigError);
  EXPECT_THROW(ngnn::parse_experiment_config(json{{"task", "nonsense"}}), ngnn::ConfigError);
  EXPECT_THROW(ngnn::parse_experiment_config(json{{"runs", 0}}), ngnn::ConfigError);
  // Two sweep axes at once.
  json two_axes{{"sweep", {{"feature_add", {0.0, 1.0}}, {"edge_noise", {0.1}}}}};
  EXPECT_THROW(ngnn::parse_experiment_config(two_axes), ngnn::ConfigError);
  // hidden grid without the depth axis.
  json bad_hidden{{"sweep", {{"position", {"none"}}, {"hidden", {8, 16}}}}};
  EXPECT_THROW(ngnn::parse_experiment_config(bad_hidden), ngnn::ConfigError);
  // model without arch.
  json no_arch{{"model", {{"hidden_dim", 8}}}};
  EXPECT_THROW(ngnn::parse_experiment_config(no_arch), ngnn::ConfigError);
}

TEST(ExperimentConfig, InvalidSpecStringNamesTheField) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["model"]["ngnn_position"] = "hidden";
  cfg_json["model"]["ngnn_spec"] = "2-swish";
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  try {
    ngnn::cmd_train(cfg, tmp.path / "out");
    FAIL() << "expected ConfigError";
  } catch (const ngnn::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ngnn_spec"), std::string::npos);
  }
}

TEST(CmdTrain, SingleRunAggregateEqualsTheRun) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["runs"] = 1;
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  const json aggregate = ngnn::cmd_train(cfg, tmp.path / "out");
  const json run = json::parse(slurp(tmp.path / "out" / "run_100.json"));
  EXPECT_DOUBLE_EQ(aggregate["test_metric"]["mean"].get<double>(),
                   run["test_metric"].get<double>());
  EXPECT_DOUBLE_EQ(aggregate["test_metric"]["std"].get<double>(), 0.0);
  EXPECT_EQ(aggregate["param_count"], run["param_count"]);
}

TEST(CmdTrain, AggregateMatchesRecomputationFromRunFiles) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["runs"] = 3;
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  const json aggregate = ngnn::cmd_train(cfg, tmp.path / "out");
  std::vector<double> metrics;
  for (std::uint64_t s = 100; s < 103; ++s)
    metrics.push_back(
        json::parse(slurp(tmp.path / "out" / ("run_" + std::to_string(s) + ".json")))
            .at("test_metric")
            .get<double>());
  double mean = 0.0;
  for (double m : metrics) mean += m;
  mean /= 3.0;
  double ss = 0.0;
  for (double m : metrics) ss += (m - mean) * (m - mean);
  const double stddev = std::sqrt(ss / 2.0);
  EXPECT_DOUBLE_EQ(aggregate["test_metric"]["mean"].get<double>(), mean);
  EXPECT_DOUBLE_EQ(aggregate["test_metric"]["std"].get<double>(), stddev);
}

TEST(CmdTrain, RerunReproducesMetricsBitwise) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  const json a = ngnn::cmd_train(cfg, tmp.path / "out_a");
  const json b = ngnn::cmd_train(cfg, tmp.path / "out_b");
  EXPECT_EQ(a["test_metric"], b["test_metric"]);
  EXPECT_EQ(a["best_valid"], b["best_valid"]);
  // Per-run files: every field except wall-clock timing must match.
  for (std::uint64_t s = 100; s < 102; ++s) {
    json ra = json::parse(slurp(tmp.path / "out_a" / ("run_" + std::to_string(s) + ".json")));
    json rb = json::parse(slurp(tmp.path / "out_b" / ("run_" + std::to_string(s) + ".json")));
    ra.erase("epoch_seconds");
    rb.erase("epoch_seconds");
    EXPECT_EQ(ra, rb);
  }
}

TEST(CmdTrain, ThreadedRunsMatchSerialRuns) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["runs"] = 3;
  ExperimentConfig serial = ngnn::parse_experiment_config(cfg_json);
  ExperimentConfig threaded = serial;
  threaded.threads = 3;
  const json a = ngnn::cmd_train(serial, tmp.path / "out_serial");
  const json b = ngnn::cmd_train(threaded, tmp.path / "out_threaded");
  EXPECT_EQ(a["test_metric"], b["test_metric"]);
}

TEST(NoiseSweep, SigmaZeroRowEqualsBaselineRun) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["sweep"] = {{"feature_add", {0.0}}};
  cfg_json["variants"] = json::array({json{{"name", "baseline"}, {"model", json::object()}}});
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  auto tables = ngnn::cmd_noise_sweep(cfg, tmp.path / "sweep");

  json plain = write_tiny_dataset(tmp.path);  // identical dataset + config
  ExperimentConfig base_cfg = ngnn::parse_experiment_config(plain);
  const json base = ngnn::cmd_train(base_cfg, tmp.path / "base");
  ASSERT_EQ(tables.size(), 1u);
  ASSERT_EQ(tables[0].rows.size(), 1u);
  EXPECT_DOUBLE_EQ(tables[0].rows[0].mean, base["test_metric"]["mean"].get<double>());
}

TEST(NoiseSweep, ConcatModeDoublesInputDimAndParams) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path, 5, 6);
  cfg_json["sweep"] = {{"feature_concat", {1.0}}};
  cfg_json["variants"] = json::array({json{{"name", "baseline"}, {"model", json::object()}}});
  cfg_json["runs"] = 1;
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  auto tables = ngnn::cmd_noise_sweep(cfg, tmp.path / "sweep");
  ASSERT_EQ(tables.size(), 1u);
  // SAGE 2-layer with in = 12 (doubled), hidden 8, out 2.
  const std::size_t expected = (2 * 12 * 8 + 8) + (2 * 8 * 2 + 2);
  EXPECT_EQ(tables[0].rows[0].params, expected);
}

TEST(NoiseSweep, DefaultVariantListCoversComparisonModels) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["sweep"] = {{"feature_add", {0.0, 2.0}}};
  cfg_json["runs"] = 1;
  cfg_json["train"]["epochs"] = 1;
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  auto tables = ngnn::cmd_noise_sweep(cfg, tmp.path / "sweep");
  ASSERT_EQ(tables.size(), 5u);
  EXPECT_EQ(tables[0].variant, "baseline");
  EXPECT_EQ(tables[1].variant, "wide-2x");
  EXPECT_EQ(tables[2].variant, "deep-plus1");
  EXPECT_EQ(tables[3].variant, "ngnn-1");
  EXPECT_EQ(tables[4].variant, "ngnn-2");
  // Wide doubles the hidden width; ngnn-2 adds blocks everywhere.
  EXPECT_GT(tables[1].rows[0].params, tables[0].rows[0].params);
  EXPECT_GT(tables[4].rows[0].params, tables[3].rows[0].params);
}

TEST(EdgeNoiseSweep, ZeroRatioRowEqualsBaselineAndGapsEmitted) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["sweep"] = {{"edge_noise", {0.0, 0.3}}};
  cfg_json["variants"] = json::array({json{{"name", "baseline"}, {"model", json::object()}},
                                      json{{"name", "ngnn-2"},
                                           {"model",
                                            {{"ngnn_position", "all"}, {"ngnn_spec", "2-relu"}}}}});
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  auto tables = ngnn::cmd_edge_noise_sweep(cfg, tmp.path / "sweep");
  ASSERT_EQ(tables.size(), 2u);

  json plain = write_tiny_dataset(tmp.path);
  const json base = ngnn::cmd_train(ngnn::parse_experiment_config(plain), tmp.path / "base");
  EXPECT_DOUBLE_EQ(tables[0].rows[0].mean, base["test_metric"]["mean"].get<double>());

  const json doc = json::parse(slurp(tmp.path / "sweep" / "edge_noise_sweep.json"));
  ASSERT_TRUE(doc.contains("gap_vs_baseline"));
  ASSERT_TRUE(doc["gap_vs_baseline"].contains("ngnn-2"));
  EXPECT_EQ(doc["gap_vs_baseline"]["ngnn-2"].size(), 2u);
  EXPECT_DOUBLE_EQ(doc["degradation"]["baseline"][0].get<double>(), 0.0);
}

TEST(Sweeps, CsvAndJsonEmissionsContainIdenticalValues) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["sweep"] = {{"feature_add", {0.0, 1.5}}};
  cfg_json["variants"] = json::array({json{{"name", "baseline"}, {"model", json::object()}}});
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  auto tables = ngnn::cmd_noise_sweep(cfg, tmp.path / "sweep");

  const json doc = json::parse(slurp(tmp.path / "sweep" / "noise_sweep.json"));
  const std::string csv = slurp(tmp.path / "sweep" / "noise_sweep_baseline.csv");
  std::stringstream lines(csv);
  std::string header, line;
  std::getline(lines, header);
  EXPECT_EQ(header, "sweep_value,mean,std,params,epoch_s");
  const json rows = doc["tables"]["baseline"]["rows"];
  for (const auto& row : rows) {
    ASSERT_TRUE(std::getline(lines, line));
    std::stringstream fields(line);
    std::string field;
    std::getline(fields, field, ',');
    EXPECT_EQ(field, row["sweep_value"].dump());
    std::getline(fields, field, ',');
    EXPECT_EQ(field, row["mean"].dump());
    std::getline(fields, field, ',');
    EXPECT_EQ(field, row["std"].dump());
    std::getline(fields, field, ',');
    EXPECT_EQ(field, row["params"].dump());
    std::getline(fields, field, ',');
    EXPECT_EQ(field, row["epoch_s"].dump());
  }
}

TEST(Sweeps, InputDatasetFilesAreNeverMutated) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  const std::string features_before = slurp(tmp.path / "features.bin");
  const std::string edges_before = slurp(tmp.path / "edges.txt");
  cfg_json["sweep"] = {{"edge_noise", {0.5}}};
  cfg_json["variants"] = json::array({json{{"name", "baseline"}, {"model", json::object()}}});
  cfg_json["runs"] = 1;
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  ngnn::cmd_edge_noise_sweep(cfg, tmp.path / "sweep");
  EXPECT_EQ(slurp(tmp.path / "features.bin"), features_before);
  EXPECT_EQ(slurp(tmp.path / "edges.txt"), edges_before);
}

TEST(DepthSweep, ParamColumnsReproduceReportedSizes) {
  TempDir tmp;
  // 100-dimensional features, 47 classes: the parameter-accounting layout.
  ngnn::SynthSpec spec;
  spec.num_nodes = 141;  // 3 nodes per class
  spec.feature_dim = 100;
  spec.num_classes = 47;
  spec.p_intra = 0.3;
  spec.q_inter = 0.01;
  spec.seed = 3;
  auto d = ngnn::gen_synth(spec);
  ngnn::save_node_dataset(d, ngnn::DatasetPaths::node_layout(tmp.path));

  json cfg_json{{"task", "node_class"},
                {"dataset", {{"dir", tmp.path.string()}}},
                {"model",
                 {{"arch", "sage"},
                  {"hidden_dim", 256},
                  {"num_layers", 3},
                  {"ngnn_position", "hidden"}}},
                {"train", {{"epochs", 1}, {"eval_every", 1}}},
                {"runs", 1},
                {"seed", 1},
                {"sweep", {{"ngnn_depth", {0, 1, 2, 4}}, {"hidden", {128, 256, 512}}}}};
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  auto tables = ngnn::cmd_depth_sweep(cfg, tmp.path / "sweep");
  ASSERT_EQ(tables.size(), 3u);

  const std::size_t expected[3][4] = {{70703, 87215, 103727, 136751},
                                      {206895, 272687, 338479, 470063},
                                      {675887, 938543, 1201199, 1726511}};
  for (std::size_t w = 0; w < 3; ++w) {
    ASSERT_EQ(tables[w].rows.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k)
      EXPECT_EQ(tables[w].rows[k].params, expected[w][k])
          << "width index " << w << " depth index " << k;
  }
}

TEST(PositionSweep, EmitsAllPoliciesWithSharedSeedsAndFormulaParams) {
  TempDir tmp;
  json cfg_json = write_tiny_dataset(tmp.path);
  cfg_json["model"]["ngnn_spec"] = "2-relu";
  cfg_json["model"]["ngnn_position"] = "hidden";
  cfg_json["model"]["num_layers"] = 3;
  cfg_json["sweep"] = {{"position", {"none", "input", "hidden", "output", "all"}}};
  cfg_json["runs"] = 2;
  cfg_json["train"]["epochs"] = 2;
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  auto tables = ngnn::cmd_position_sweep(cfg, tmp.path / "sweep");
  ASSERT_EQ(tables.size(), 1u);
  const auto& rows = tables[0].rows;
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].sweep_value.get<std::string>(), "none");

  // Formula oracle: baseline + k*(w^2+w) per attached layer (SAGE, h=8, out=2, L=3).
  const std::size_t base = (2 * 6 * 8 + 8) + (2 * 8 * 8 + 8) + (2 * 8 * 2 + 2);
  const std::size_t h2 = 2 * (8 * 8 + 8), o2 = 2 * (2 * 2 + 2);
  EXPECT_EQ(rows[0].params, base);
  EXPECT_EQ(rows[1].params, base + h2);       // input layer emits hidden width
  EXPECT_EQ(rows[2].params, base + h2);       // single hidden layer
  EXPECT_EQ(rows[3].params, base + o2);       // output layer emits out_dim
  EXPECT_EQ(rows[4].params, base + 2 * h2 + o2);

  // "none" row equals a plain baseline train with the same seeds.
  json plain = write_tiny_dataset(tmp.path);
  plain["model"]["num_layers"] = 3;
  plain["train"]["epochs"] = 2;
  plain["runs"] = 2;
  const json base_run = ngnn::cmd_train(ngnn::parse_experiment_config(plain), tmp.path / "base");
  EXPECT_DOUBLE_EQ(rows[0].mean, base_run["test_metric"]["mean"].get<double>());
}

TEST(Paramcount, BreakdownSumsToTotal) {
  json cfg_json{{"model",
                 {{"arch", "sage"},
                  {"in_dim", 100},
                  {"hidden_dim", 256},
                  {"out_dim", 47},
                  {"num_layers", 3},
                  {"ngnn_position", "hidden"},
                  {"ngnn_spec", "2-relu"}}}};
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  const json doc = ngnn::cmd_paramcount(cfg);
  EXPECT_EQ(doc["total"].get<std::size_t>(), 338479u);
  std::size_t sum = 0;
  for (const auto& layer : doc["per_layer"])
    sum += layer["gnn_params"].get<std::size_t>() + layer["ngnn_params"].get<std::size_t>();
  EXPECT_EQ(sum, 338479u);
}

TEST(Paramcount, RequiresExplicitDims) {
  json cfg_json{{"model", {{"arch", "sage"}, {"hidden_dim", 256}, {"num_layers", 3}}}};
  ExperimentConfig cfg = ngnn::parse_experiment_config(cfg_json);
  EXPECT_THROW(ngnn::cmd_paramcount(cfg), ngnn::ConfigError);
}

TEST(GenSynthCommand, WritesLoadableDatasetAndWarnsOnUninformativeStructure) {
  TempDir tmp;
  json spec{{"num_nodes", 120}, {"feature_dim", 4}, {"p_intra", 0.02}, {"q_inter", 0.05},
            {"seed", 2}};
  const json manifest = ngnn::cmd_gen_synth(spec, tmp.path / "data");
  EXPECT_TRUE(manifest.contains("warning"));
  auto d = ngnn::load_node_dataset(ngnn::DatasetPaths::node_layout(tmp.path / "data"));
  EXPECT_EQ(d.num_nodes(), 120u);
}
