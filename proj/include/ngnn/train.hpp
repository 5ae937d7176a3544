#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ngnn/dataset.hpp"
#include "ngnn/graph.hpp"
#include "ngnn/matrix.hpp"
#include "ngnn/metrics.hpp"
#include "ngnn/model.hpp"
#include "ngnn/optim.hpp"
#include "ngnn/sampling.hpp"
#include "ngnn/tape.hpp"

namespace ngnn {

enum class TrainMethod { full_graph, neighbor_sampling, cluster };

inline const char* to_string(TrainMethod m) {
  switch (m) {
    case TrainMethod::full_graph: return "full_graph";
    case TrainMethod::neighbor_sampling: return "neighbor_sampling";
    case TrainMethod::cluster: return "cluster";
  }
  return "?";
}

inline TrainMethod train_method_from_string(std::string_view s) {
  if (s == "full_graph") return TrainMethod::full_graph;
  if (s == "neighbor_sampling") return TrainMethod::neighbor_sampling;
  if (s == "cluster") return TrainMethod::cluster;
  throw std::invalid_argument("unknown training method: " + std::string(s));
}

struct TrainConfig {
  TrainMethod method = TrainMethod::full_graph;
  std::size_t epochs = 100;
  std::size_t batch_size = 0;  // 0 = one batch with everything
  std::vector<std::int64_t> fanouts;
  std::size_t num_clusters = 0;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  std::size_t hits_k = 50;  // link prediction evaluation cut

  void validate(std::size_t num_layers) const {
    if (method == TrainMethod::neighbor_sampling) {
      if (fanouts.empty())
        throw std::invalid_argument("TrainConfig: neighbor_sampling requires fanouts");
      if (fanouts.size() != num_layers)
        throw std::invalid_argument("TrainConfig: one fanout per GNN layer required");
    } else if (!fanouts.empty()) {
      throw std::invalid_argument("TrainConfig: fanouts only apply to neighbor_sampling");
    }
    if (method == TrainMethod::cluster) {
      if (num_clusters == 0)
        throw std::invalid_argument("TrainConfig: cluster method requires num_clusters");
    } else if (num_clusters != 0) {
      throw std::invalid_argument("TrainConfig: num_clusters only applies to cluster method");
    }
    if (eval_every == 0) throw std::invalid_argument("TrainConfig: eval_every must be positive");
  }
};

/// Outcome of one training run. The test metric is taken at the epoch with
/// the best validation metric.
struct RunResult {
  std::vector<double> train_loss;     // one entry per epoch
  std::vector<std::size_t> eval_epochs;
  std::vector<double> valid_curve;
  double best_valid = 0.0;
  double test_metric = 0.0;
  std::vector<double> epoch_seconds;  // per-epoch wall clock, evaluation excluded
  std::size_t param_count = 0;
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
};

/// Mean and sample std of per-epoch wall clock, skipping the first (warm-up)
/// epoch whenever more than one sample exists.
struct EpochTimeStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t samples = 0;
};

inline EpochTimeStats epoch_time_stats(std::span<const double> epoch_seconds) {
  EpochTimeStats st;
  if (epoch_seconds.empty()) return st;
  const std::size_t skip = epoch_seconds.size() > 1 ? 1 : 0;
  st.samples = epoch_seconds.size() - skip;
  double sum = 0.0;
  for (std::size_t i = skip; i < epoch_seconds.size(); ++i) sum += epoch_seconds[i];
  st.mean = sum / static_cast<double>(st.samples);
  if (st.samples > 1) {
    double ss = 0.0;
    for (std::size_t i = skip; i < epoch_seconds.size(); ++i)
      ss += (epoch_seconds[i] - st.mean) * (epoch_seconds[i] - st.mean);
    st.stddev = std::sqrt(ss / static_cast<double>(st.samples - 1));
  }
  return st;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class Real>
std::vector<Matrix<Real>> collect_grads(Tape<Real>& tape,
                                        const std::vector<typename Model<Real>::ParamRef>& refs,
                                        const ParamBinder<Real>& binder) {
  std::unordered_map<const void*, typename Tape<Real>::Tensor> where;
  where.reserve(binder.bound.size());
  for (const auto& [ptr, tensor] : binder.bound) where.emplace(ptr, tensor);
  std::vector<Matrix<Real>> grads;
  grads.reserve(refs.size());
  for (const auto& ref : refs) {
    auto it = where.find(ref.tensor);
    if (it == where.end())
      grads.emplace_back(ref.tensor->rows(), ref.tensor->cols());  // unused: zero grad
    else
      grads.push_back(tape.grad(it->second));
  }
  return grads;
}

/// Full-graph eval forward; returns the output logits/embeddings.
template <class Real>
Matrix<Real> eval_forward(const Model<Real>& model, const Graph& g, const Matrix<Real>& x) {
  Tape<Real> tape;
  std::vector<CsrView> views(model.config().num_layers, g.view());
  auto out = model.forward(tape, views, tape.input(x, false), /*train_mode=*/false);
  return tape.value(out);
}

template <class Real>
std::vector<std::int32_t> argmax_rows(const Matrix<Real>& logits, std::span<const NodeId> ids) {
  std::vector<std::int32_t> preds;
  preds.reserve(ids.size());
  for (NodeId v : ids) {
    const Real* row = logits.row(v);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (row[c] > row[best]) best = c;
    preds.push_back(static_cast<std::int32_t>(best));
  }
  return preds;
}

template <class Real>
double split_accuracy(const Matrix<Real>& logits, std::span<const NodeId> ids,
                      std::span<const std::int32_t> labels) {
  auto preds = argmax_rows(logits, ids);
  std::vector<std::int32_t> truth;
  truth.reserve(ids.size());
  for (NodeId v : ids) truth.push_back(labels[v]);
  return accuracy(preds, truth);
}

template <class Real>
std::vector<double> edge_scores(const Matrix<Real>& h, std::span<const EdgePair> edges) {
  std::vector<double> scores;
  scores.reserve(edges.size());
  for (const auto& [u, v] : edges) {
    const Real* a = h.row(u);
    const Real* b = h.row(v);
    double acc = 0.0;
    for (std::size_t j = 0; j < h.cols(); ++j)
      acc += static_cast<double>(a[j]) * static_cast<double>(b[j]);
    scores.push_back(acc);
  }
  return scores;
}

}  // namespace detail

/// Trains a node classifier with the configured driver. Deterministic for a
/// fixed (seed, thread) pair: all stochastic choices draw from streams split
/// off the run seed.
template <class Real = float>
RunResult train_node_classifier(const NodeDataset& data, const ModelConfig& mcfg,
                                const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate(mcfg.num_layers);
  if (mcfg.in_dim != data.features.cols())
    throw std::invalid_argument("train_node_classifier: in_dim != feature width");
  if (data.train_ids.empty()) throw std::invalid_argument("train_node_classifier: empty train split");

  RngStream root(tcfg.seed);
  Model<Real> model = build_model<Real>(mcfg, root.split("init"));
  auto refs = model.params();
  std::vector<Matrix<Real>*> param_ptrs;
  for (auto& r : refs) param_ptrs.push_back(r.tensor);
  Optimizer<Real> opt(tcfg.optimizer);
  RngStream dropout_rng = root.split("dropout");

  if (mcfg.arch == Arch::gcn && !data.graph.normalized())
    throw std::invalid_argument("train_node_classifier: gcn requires a normalized graph");
  const Graph& graph = data.graph;

  const Matrix<Real> features = data.features.template cast<Real>();

  // Cluster preparation (partition + induced subgraphs) happens once.
  struct ClusterPiece {
    std::vector<NodeId> nodes;
    Graph graph;
    Matrix<Real> features;
    std::vector<std::int32_t> labels;       // local
    std::vector<NodeId> train_local;
    std::size_t train_count = 0;
  };
  std::vector<ClusterPiece> pieces;
  if (tcfg.method == TrainMethod::cluster) {
    RngStream part_rng = root.split("cluster");
    auto parts = cluster_partition(graph, tcfg.num_clusters, part_rng);
    std::vector<char> in_train(graph.num_nodes(), 0);
    for (NodeId v : data.train_ids) in_train[v] = 1;
    for (auto& part : parts) {
      ClusterPiece piece;
      piece.nodes = std::move(part);
      piece.graph = induced_subgraph(graph, piece.nodes);
      if (mcfg.arch == Arch::gcn) piece.graph = gcn_normalize(piece.graph);
      piece.features = Matrix<Real>(piece.nodes.size(), features.cols());
      piece.labels.resize(piece.nodes.size());
      for (std::size_t i = 0; i < piece.nodes.size(); ++i) {
        std::copy(features.row(piece.nodes[i]), features.row(piece.nodes[i]) + features.cols(),
                  piece.features.row(i));
        piece.labels[i] = data.labels[piece.nodes[i]];
        if (in_train[piece.nodes[i]]) piece.train_local.push_back(static_cast<NodeId>(i));
      }
      piece.train_count = piece.train_local.size();
      pieces.push_back(std::move(piece));
    }
  }

  RunResult result;
  result.seed = tcfg.seed;
  result.param_count = model.param_count();

  std::vector<std::int32_t> train_labels;
  for (NodeId v : data.train_ids) train_labels.push_back(data.labels[v]);

  auto evaluate = [&](std::size_t epoch) {
    Matrix<Real> logits = detail::eval_forward(model, graph, features);
    const double valid = detail::split_accuracy(logits, data.valid_ids, data.labels);
    const double test = detail::split_accuracy(logits, data.test_ids, data.labels);
    result.eval_epochs.push_back(epoch);
    result.valid_curve.push_back(valid);
    if (result.valid_curve.size() == 1 || valid > result.best_valid) {
      result.best_valid = valid;
      result.test_metric = test;
    }
  };

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto t0 = detail::Clock::now();
    RngStream epoch_rng = root.split("epoch").split(epoch);
    double epoch_loss = 0.0;

    if (tcfg.method == TrainMethod::full_graph) {
      Tape<Real> tape;
      ParamBinder<Real> binder(tape);
      std::vector<CsrView> views(mcfg.num_layers, graph.view());
      auto out = model.forward(tape, views, tape.input(features, false), true, &dropout_rng,
                               &binder);
      auto picked = tape.gather_rows(out, data.train_ids);
      auto loss = tape.softmax_cross_entropy(picked, train_labels);
      tape.backward(loss);
      opt.step(param_ptrs, detail::collect_grads(tape, refs, binder));
      epoch_loss = static_cast<double>(tape.value(loss)(0, 0));
    } else if (tcfg.method == TrainMethod::neighbor_sampling) {
      std::vector<NodeId> order = data.train_ids;
      epoch_rng.split("shuffle").shuffle(order);
      const std::size_t bs = tcfg.batch_size == 0 ? order.size() : tcfg.batch_size;
      double weighted = 0.0;
      std::size_t batch_index = 0;
      for (std::size_t at = 0; at < order.size(); at += bs, ++batch_index) {
        const std::size_t len = std::min(bs, order.size() - at);
        std::span<const NodeId> seeds(order.data() + at, len);
        RngStream sample_rng = epoch_rng.split("sample").split(batch_index);
        SampledBlock block = neighbor_sample(graph, seeds, tcfg.fanouts, sample_rng);
        Matrix<Real> batch_x(block.hops.front().src_ids.size(), features.cols());
        for (std::size_t i = 0; i < block.hops.front().src_ids.size(); ++i)
          std::copy(features.row(block.hops.front().src_ids[i]),
                    features.row(block.hops.front().src_ids[i]) + features.cols(),
                    batch_x.row(i));
        std::vector<std::int32_t> batch_labels;
        batch_labels.reserve(len);
        for (NodeId v : seeds) batch_labels.push_back(data.labels[v]);

        Tape<Real> tape;
        ParamBinder<Real> binder(tape);
        std::vector<CsrView> views;
        for (const auto& hop : block.hops) views.push_back(hop.view());
        auto out = model.forward(tape, views, tape.input(std::move(batch_x), false), true,
                                 &dropout_rng, &binder);
        auto loss = tape.softmax_cross_entropy(out, batch_labels);
        tape.backward(loss);
        opt.step(param_ptrs, detail::collect_grads(tape, refs, binder));
        weighted += static_cast<double>(tape.value(loss)(0, 0)) * static_cast<double>(len);
      }
      epoch_loss = weighted / static_cast<double>(order.size());
    } else {  // cluster
      std::vector<std::size_t> order(pieces.size());
      std::iota(order.begin(), order.end(), 0);
      epoch_rng.split("order").shuffle(order);
      double weighted = 0.0;
      std::size_t total_train = 0;
      for (std::size_t c : order) {
        ClusterPiece& piece = pieces[c];
        if (piece.train_local.empty()) continue;
        Tape<Real> tape;
        ParamBinder<Real> binder(tape);
        std::vector<CsrView> views(mcfg.num_layers, piece.graph.view());
        auto out = model.forward(tape, views, tape.input(piece.features, false), true,
                                 &dropout_rng, &binder);
        auto picked = tape.gather_rows(out, piece.train_local);
        std::vector<std::int32_t> labels;
        labels.reserve(piece.train_local.size());
        for (NodeId v : piece.train_local) labels.push_back(piece.labels[v]);
        auto loss = tape.softmax_cross_entropy(picked, labels);
        tape.backward(loss);
        opt.step(param_ptrs, detail::collect_grads(tape, refs, binder));
        weighted += static_cast<double>(tape.value(loss)(0, 0)) *
                    static_cast<double>(piece.train_count);
        total_train += piece.train_count;
      }
      epoch_loss = total_train ? weighted / static_cast<double>(total_train) : 0.0;
    }

    result.epoch_seconds.push_back(detail::seconds_since(t0));
    result.train_loss.push_back(epoch_loss);
    ++result.epochs_run;
    if ((epoch + 1) % tcfg.eval_every == 0 || epoch + 1 == tcfg.epochs) evaluate(epoch + 1);
  }
  if (tcfg.epochs == 0) evaluate(0);
  return result;
}

/// Trains a link predictor: GNN encoder over the training graph, edge score
/// as the endpoint embedding dot product, BCE against per-step resampled
/// negatives (1:1). Evaluation ranks the fixed split negatives with hits@K.
template <class Real = float>
RunResult train_link_predictor(const LinkDataset& data, const ModelConfig& mcfg,
                               const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate(mcfg.num_layers);
  if (mcfg.in_dim != data.features.cols())
    throw std::invalid_argument("train_link_predictor: in_dim != feature width");
  if (tcfg.method != TrainMethod::full_graph)
    throw std::invalid_argument("train_link_predictor: only full_graph training is supported");
  if (data.train_pos.empty()) throw std::invalid_argument("train_link_predictor: no training edges");
  if (tcfg.hits_k > data.valid_neg.size() || tcfg.hits_k > data.test_neg.size())
    throw std::invalid_argument("train_link_predictor: hits_k exceeds negative set size");

  RngStream root(tcfg.seed);
  Model<Real> model = build_model<Real>(mcfg, root.split("init"));
  auto refs = model.params();
  std::vector<Matrix<Real>*> param_ptrs;
  for (auto& r : refs) param_ptrs.push_back(r.tensor);
  Optimizer<Real> opt(tcfg.optimizer);
  RngStream dropout_rng = root.split("dropout");

  if (mcfg.arch == Arch::gcn && !data.graph.normalized())
    throw std::invalid_argument("train_link_predictor: gcn requires a normalized graph");
  const Graph& graph = data.graph;
  const Matrix<Real> features = data.features.template cast<Real>();

  RunResult result;
  result.seed = tcfg.seed;
  result.param_count = model.param_count();

  auto evaluate = [&](std::size_t epoch) {
    Matrix<Real> h = detail::eval_forward(model, graph, features);
    auto vp = detail::edge_scores(h, data.valid_pos);
    auto vn = detail::edge_scores(h, data.valid_neg);
    auto tp = detail::edge_scores(h, data.test_pos);
    auto tn = detail::edge_scores(h, data.test_neg);
    const double valid = hits_at_k(vp, vn, tcfg.hits_k);
    const double test = hits_at_k(tp, tn, tcfg.hits_k);
    result.eval_epochs.push_back(epoch);
    result.valid_curve.push_back(valid);
    if (result.valid_curve.size() == 1 || valid > result.best_valid) {
      result.best_valid = valid;
      result.test_metric = test;
    }
  };

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto t0 = detail::Clock::now();
    RngStream epoch_rng = root.split("epoch").split(epoch);
    std::vector<std::size_t> order(data.train_pos.size());
    std::iota(order.begin(), order.end(), 0);
    epoch_rng.split("shuffle").shuffle(order);
    const std::size_t bs = tcfg.batch_size == 0 ? order.size() : tcfg.batch_size;
    double weighted = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t at = 0; at < order.size(); at += bs, ++batch_index) {
      const std::size_t len = std::min(bs, order.size() - at);
      std::vector<NodeId> src, dst;
      src.reserve(2 * len);
      dst.reserve(2 * len);
      for (std::size_t i = 0; i < len; ++i) {
        src.push_back(data.train_pos[order[at + i]].first);
        dst.push_back(data.train_pos[order[at + i]].second);
      }
      RngStream neg_rng = epoch_rng.split("neg").split(batch_index);
      auto negs = negative_sample_edges(graph, len, neg_rng);
      for (const auto& [u, v] : negs) {
        src.push_back(u);
        dst.push_back(v);
      }
      std::vector<std::int32_t> targets(2 * len, 0);
      std::fill(targets.begin(), targets.begin() + len, 1);

      Tape<Real> tape;
      ParamBinder<Real> binder(tape);
      std::vector<CsrView> views(mcfg.num_layers, graph.view());
      auto h = model.forward(tape, views, tape.input(features, false), true, &dropout_rng,
                             &binder);
      auto scores = tape.edge_dot(h, src, dst);
      auto loss = tape.bce_with_logits(scores, targets);
      tape.backward(loss);
      opt.step(param_ptrs, detail::collect_grads(tape, refs, binder));
      weighted += static_cast<double>(tape.value(loss)(0, 0)) * static_cast<double>(len);
    }
    result.epoch_seconds.push_back(detail::seconds_since(t0));
    result.train_loss.push_back(weighted / static_cast<double>(data.train_pos.size()));
    ++result.epochs_run;
    if ((epoch + 1) % tcfg.eval_every == 0 || epoch + 1 == tcfg.epochs) evaluate(epoch + 1);
  }
  if (tcfg.epochs == 0) evaluate(0);
  return result;
}

}  // namespace ngnn
