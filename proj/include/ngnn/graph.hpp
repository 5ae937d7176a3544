#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ngnn/rng.hpp"
#include "ngnn/tape.hpp"

namespace ngnn {

using NodeId = std::uint32_t;
using EdgePair = std::pair<NodeId, NodeId>;

/// Immutable symmetric CSR graph. Neighbor lists are sorted and free of
/// duplicates and self-loops. Normalization coefficients, when present, are
/// the symmetric-normalized weights with virtual self-loops: per-edge
/// 1/sqrt(d~u d~v) plus a per-node self weight 1/d~v, d~ = degree + 1.
class Graph {
 public:
  Graph() = default;

  static Graph from_edges(std::span<const EdgePair> edges, std::size_t num_nodes,
                          bool symmetrize = true) {
    for (const auto& [u, v] : edges)
      if (u >= num_nodes || v >= num_nodes)
        throw std::invalid_argument("Graph::from_edges: endpoint out of range");
    std::vector<EdgePair> directed;
    directed.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
      if (u == v) continue;  // drop self-loops
      directed.emplace_back(u, v);
      if (symmetrize) directed.emplace_back(v, u);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    Graph g;
    g.num_nodes_ = num_nodes;
    g.offsets_.assign(num_nodes + 1, 0);
    for (const auto& [u, v] : directed) ++g.offsets_[u + 1];
    for (std::size_t i = 0; i < num_nodes; ++i) g.offsets_[i + 1] += g.offsets_[i];
    g.indices_.resize(directed.size());
    std::vector<std::uint32_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (const auto& [u, v] : directed) g.indices_[cursor[u]++] = v;
    return g;
  }

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_directed_edges() const { return indices_.size(); }
  std::size_t num_undirected_edges() const { return indices_.size() / 2; }

  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {indices_.data() + offsets_[v], indices_.data() + offsets_[v + 1]};
  }

  bool has_edge(NodeId u, NodeId v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  const std::vector<std::uint32_t>& offsets() const { return offsets_; }
  const std::vector<NodeId>& indices() const { return indices_; }

  bool normalized() const { return has_norm_; }
  const std::vector<double>& gcn_coeff() const { return gcn_coeff_; }
  const std::vector<double>& gcn_self_coeff() const { return gcn_self_coeff_; }

  /// Each undirected edge once, as (u, v) with u < v.
  std::vector<EdgePair> undirected_edges() const {
    std::vector<EdgePair> out;
    out.reserve(num_undirected_edges());
    for (NodeId u = 0; u < num_nodes_; ++u)
      for (NodeId v : neighbors(u))
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  /// View over the whole graph: sources and destinations are both all nodes.
  CsrView view() const {
    CsrView v;
    v.offsets = offsets_;
    v.indices = indices_;
    if (has_norm_) {
      v.coeff = gcn_coeff_;
      v.self_coeff = gcn_self_coeff_;
    }
    v.num_src = num_nodes_;
    v.num_dst = num_nodes_;
    return v;
  }

  friend Graph gcn_normalize(const Graph& g);

 private:
  std::size_t num_nodes_ = 0;
  std::vector<std::uint32_t> offsets_{0};
  std::vector<NodeId> indices_;
  bool has_norm_ = false;
  std::vector<double> gcn_coeff_;
  std::vector<double> gcn_self_coeff_;
};

/// Symmetric normalization with virtual self-loops: coefficient for edge
/// (u,v) is 1/sqrt(d~u d~v) and for the self term 1/d~v, with d~ = degree+1.
inline Graph gcn_normalize(const Graph& g) {
  Graph out = g;
  out.gcn_coeff_.resize(g.num_directed_edges());
  out.gcn_self_coeff_.resize(g.num_nodes());
  std::vector<double> inv_sqrt(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    const auto& offs = g.offsets();
    for (std::uint32_t e = offs[u]; e < offs[u + 1]; ++e)
      out.gcn_coeff_[e] = inv_sqrt[u] * inv_sqrt[g.indices()[e]];
    out.gcn_self_coeff_[u] = inv_sqrt[u] * inv_sqrt[u];
  }
  out.has_norm_ = true;
  return out;
}

namespace detail {

inline std::uint64_t pair_key(NodeId u, NodeId v) {
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

/// Uniform sample of `count` distinct non-edges (u < v, no self loops).
/// Throws when fewer non-edges exist than requested.
inline std::vector<EdgePair> sample_non_edges(const Graph& g, std::size_t count, RngStream& rng) {
  const std::size_t n = g.num_nodes();
  const std::size_t total_pairs = n * (n - 1) / 2;
  const std::size_t existing = g.num_undirected_edges();
  if (total_pairs < existing + count)
    throw std::invalid_argument("sample_non_edges: requested count exceeds available non-edges");
  std::vector<EdgePair> out;
  out.reserve(count);
  std::unordered_set<std::uint64_t> seen;
  const std::size_t available = total_pairs - existing;
  if (count * 4 >= available) {
    // Dense case: enumerate the non-edges and sample without replacement.
    std::vector<EdgePair> pool;
    pool.reserve(available);
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v)
        if (!g.has_edge(u, v)) pool.emplace_back(u, v);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }
  while (out.size() < count) {
    NodeId u = static_cast<NodeId>(rng.uniform_int(n));
    NodeId v = static_cast<NodeId>(rng.uniform_int(n));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (g.has_edge(u, v)) continue;
    if (!seen.insert(pair_key(u, v)).second) continue;
    out.emplace_back(u, v);
  }
  return out;
}

}  // namespace detail

/// Number of undirected edges injected for noise ratio `ratio` on a graph
/// with `undirected_edges` existing undirected edges.
inline std::size_t noise_edge_count(double ratio, std::size_t undirected_edges) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(undirected_edges)));
}

/// Adds round(ratio * |E|) random undirected edges over non-existing,
/// non-self pairs. Original edges are retained; normalization coefficients
/// are dropped (the caller re-normalizes if needed).
inline Graph perturb_edges(const Graph& g, double ratio, RngStream& rng) {
  if (ratio < 0) throw std::invalid_argument("perturb_edges: ratio must be non-negative");
  const std::size_t add = noise_edge_count(ratio, g.num_undirected_edges());
  std::vector<EdgePair> edges = g.undirected_edges();
  if (add > 0) {
    std::vector<EdgePair> extra = detail::sample_non_edges(g, add, rng);
    edges.insert(edges.end(), extra.begin(), extra.end());
  }
  return Graph::from_edges(edges, g.num_nodes(), /*symmetrize=*/true);
}

/// Uniform non-edges for link-prediction negatives: distinct, no self-loops,
/// none present in the graph.
inline std::vector<EdgePair> negative_sample_edges(const Graph& g, std::size_t count,
                                                   RngStream& rng) {
  if (count == 0) return {};
  return detail::sample_non_edges(g, count, rng);
}

}  // namespace ngnn
