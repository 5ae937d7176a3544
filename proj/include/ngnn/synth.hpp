#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngnn/dataset.hpp"
#include "ngnn/graph.hpp"
#include "ngnn/matrix.hpp"
#include "ngnn/rng.hpp"

namespace ngnn {

/// Stochastic-block-model dataset recipe: C blocks, intra-block edge
/// probability p, inter-block q, features drawn as the class mean (random
/// Gaussian directions rescaled to pairwise separation `mean_separation`)
/// plus unit Gaussian noise. Splits are 60/20/20 by default.
struct SynthSpec {
  std::size_t num_nodes = 2000;
  std::size_t feature_dim = 16;
  std::size_t num_classes = 2;
  double p_intra = 0.02;
  double q_inter = 0.002;
  double mean_separation = 1.0;
  double train_frac = 0.6;
  double valid_frac = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_nodes < 4) throw std::invalid_argument("SynthSpec: num_nodes too small");
    if (num_classes < 2 || num_classes > num_nodes)
      throw std::invalid_argument("SynthSpec: need 2 <= num_classes <= num_nodes");
    if (feature_dim == 0) throw std::invalid_argument("SynthSpec: feature_dim must be positive");
    if (p_intra < 0 || p_intra > 1 || q_inter < 0 || q_inter > 1)
      throw std::invalid_argument("SynthSpec: edge probabilities must be in [0,1]");
    if (mean_separation < 0)
      throw std::invalid_argument("SynthSpec: mean_separation must be non-negative");
    if (train_frac <= 0 || valid_frac < 0 || train_frac + valid_frac >= 1)
      throw std::invalid_argument("SynthSpec: bad split fractions");
  }

  /// Structure carries no class signal when q >= p.
  bool structurally_informative() const { return q_inter < p_intra; }
};

inline NodeDataset gen_synth(const SynthSpec& spec) {
  spec.validate();
  RngStream root(spec.seed);
  const std::size_t n = spec.num_nodes;
  const std::size_t c = spec.num_classes;

  // Contiguous block labels: node v belongs to block v*C/N.
  std::vector<std::int32_t> labels(n);
  for (std::size_t v = 0; v < n; ++v)
    labels[v] = static_cast<std::int32_t>(v * c / n);

  // Edges: one Bernoulli draw per unordered pair.
  RngStream edge_rng = root.split("edges");
  std::vector<EdgePair> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = labels[u] == labels[v] ? spec.p_intra : spec.q_inter;
      if (edge_rng.uniform() < p) edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }

  // Class means: Gaussian directions rescaled so the minimum pairwise
  // distance equals mean_separation (identical means when separation is 0).
  RngStream mean_rng = root.split("means");
  std::vector<std::vector<double>> means(c, std::vector<double>(spec.feature_dim, 0.0));
  if (spec.mean_separation > 0) {
    for (auto& m : means)
      for (double& x : m) x = mean_rng.normal();
    double min_dist = 0.0;
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = a + 1; b < c; ++b) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < spec.feature_dim; ++j)
          d2 += (means[a][j] - means[b][j]) * (means[a][j] - means[b][j]);
        const double d = std::sqrt(d2);
        if (a == 0 && b == 1) min_dist = d;
        min_dist = std::min(min_dist, d);
      }
    if (min_dist == 0.0) throw std::runtime_error("gen_synth: degenerate class means drawn");
    const double s = spec.mean_separation / min_dist;
    for (auto& m : means)
      for (double& x : m) x *= s;
  }

  RngStream feat_rng = root.split("features");
  Matrix<float> features(n, spec.feature_dim);
  for (std::size_t v = 0; v < n; ++v) {
    const auto& mu = means[labels[v]];
    float* row = features.row(v);
    for (std::size_t j = 0; j < spec.feature_dim; ++j)
      row[j] = static_cast<float>(mu[j] + feat_rng.normal());
  }

  // 60/20/20 split over a shuffled node order.
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0);
  root.split("split").shuffle(order);
  const std::size_t n_train = static_cast<std::size_t>(spec.train_frac * static_cast<double>(n));
  const std::size_t n_valid = static_cast<std::size_t>(spec.valid_frac * static_cast<double>(n));

  NodeDataset d;
  d.graph = Graph::from_edges(edges, n, /*symmetrize=*/true);
  d.features = std::move(features);
  d.labels = std::move(labels);
  d.train_ids.assign(order.begin(), order.begin() + n_train);
  d.valid_ids.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  d.test_ids.assign(order.begin() + n_train + n_valid, order.end());
  std::sort(d.train_ids.begin(), d.train_ids.end());
  std::sort(d.valid_ids.begin(), d.valid_ids.end());
  std::sort(d.test_ids.begin(), d.test_ids.end());
  return d;
}

/// Link-prediction variant: the SBM edge set is split 60/20/20 into the
/// training graph and held-out valid/test positives; negatives are uniform
/// non-edges of the full graph, disjoint across splits.
inline LinkDataset gen_synth_link(const SynthSpec& spec, std::size_t negatives_per_split = 0) {
  NodeDataset nd = gen_synth(spec);
  RngStream root(spec.seed);
  std::vector<EdgePair> edges = nd.graph.undirected_edges();
  root.split("edge_split").shuffle(edges);
  const std::size_t n_train = static_cast<std::size_t>(spec.train_frac * static_cast<double>(edges.size()));
  const std::size_t n_valid = static_cast<std::size_t>(spec.valid_frac * static_cast<double>(edges.size()));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= edges.size())
    throw std::invalid_argument("gen_synth_link: too few edges to split");

  LinkDataset d;
  d.features = std::move(nd.features);
  d.train_pos.assign(edges.begin(), edges.begin() + n_train);
  d.valid_pos.assign(edges.begin() + n_train, edges.begin() + n_train + n_valid);
  d.test_pos.assign(edges.begin() + n_train + n_valid, edges.end());
  d.graph = Graph::from_edges(d.train_pos, spec.num_nodes, /*symmetrize=*/true);

  const std::size_t per_split =
      negatives_per_split == 0 ? std::max<std::size_t>(d.valid_pos.size(), 100) : negatives_per_split;
  RngStream neg_rng = root.split("negatives");
  auto all_neg = negative_sample_edges(nd.graph, 2 * per_split, neg_rng);
  d.valid_neg.assign(all_neg.begin(), all_neg.begin() + per_split);
  d.test_neg.assign(all_neg.begin() + per_split, all_neg.end());
  return d;
}

}  // namespace ngnn
