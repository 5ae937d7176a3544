#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ngnn/graph.hpp"
#include "ngnn/rng.hpp"

namespace ngnn {

/// One bipartite hop of a sampled computation block. Destination nodes are
/// the first num_dst entries of src_ids, so a destination's own features sit
/// at the same local row on the source side. Edge indices are local source
/// positions. When the parent graph is normalized the per-edge and self
/// coefficients are carried over so GCN forwards work on blocks.
struct BlockHop {
  std::vector<NodeId> src_ids;  // global ids; prefix of length num_dst == dst ids
  std::size_t num_dst = 0;
  Csr csr;                      // csr.num_src == src_ids.size(), csr.num_dst == num_dst

  std::span<const NodeId> dst_ids() const { return {src_ids.data(), num_dst}; }
  CsrView view() const { return csr.view(); }
};

/// Hops ordered input -> output: hop.front() consumes raw features, and
/// hop[i]'s destinations are hop[i+1]'s sources.
struct SampledBlock {
  std::vector<BlockHop> hops;
};

/// Per-hop uniform neighbor sampling without replacement, capped at the
/// degree. fanouts[i] belongs to GNN layer i (input hop first). fanout 0
/// keeps destinations with no incoming edges.
inline SampledBlock neighbor_sample(const Graph& g, std::span<const NodeId> seeds,
                                    std::span<const std::int64_t> fanouts, RngStream& rng) {
  if (seeds.empty()) throw std::invalid_argument("neighbor_sample: empty seed set");
  for (NodeId s : seeds)
    if (s >= g.num_nodes()) throw std::invalid_argument("neighbor_sample: seed out of range");
  for (std::int64_t f : fanouts)
    if (f < 0) throw std::invalid_argument("neighbor_sample: fanout must be non-negative");

  SampledBlock block;
  block.hops.resize(fanouts.size());
  std::vector<NodeId> dst(seeds.begin(), seeds.end());
  std::vector<NodeId> scratch;
  // Build output hop first, walking toward the input hop.
  for (std::size_t hop = fanouts.size(); hop-- > 0;) {
    BlockHop& b = block.hops[hop];
    RngStream hop_rng = rng.split(hop);
    b.num_dst = dst.size();
    b.src_ids = dst;
    std::unordered_map<NodeId, std::uint32_t> local;
    local.reserve(dst.size() * 2);
    for (std::size_t i = 0; i < dst.size(); ++i) local.emplace(dst[i], i);

    const std::size_t fanout = static_cast<std::size_t>(fanouts[hop]);
    b.csr.offsets.assign(dst.size() + 1, 0);
    const bool carry_norm = g.normalized();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const NodeId v = dst[i];
      auto nbrs = g.neighbors(v);
      scratch.clear();
      if (nbrs.size() <= fanout) {
        scratch.assign(nbrs.begin(), nbrs.end());
      } else if (fanout > 0) {
        // Partial Fisher-Yates over neighbor positions, then sort to keep
        // the per-destination reduction order stable.
        std::vector<std::uint32_t> pos(nbrs.size());
        std::iota(pos.begin(), pos.end(), 0);
        RngStream node_rng = hop_rng.split(v);
        for (std::size_t k = 0; k < fanout; ++k) {
          const std::size_t j = k + static_cast<std::size_t>(node_rng.uniform_int(pos.size() - k));
          std::swap(pos[k], pos[j]);
        }
        pos.resize(fanout);
        std::sort(pos.begin(), pos.end());
        for (std::uint32_t p : pos) scratch.push_back(nbrs[p]);
      }
      for (NodeId u : scratch) {
        auto [it, inserted] = local.emplace(u, static_cast<std::uint32_t>(b.src_ids.size()));
        if (inserted) b.src_ids.push_back(u);
        b.csr.indices.push_back(it->second);
        if (carry_norm) {
          // Locate the (u -> v) coefficient in the parent CSR.
          const auto vn = g.neighbors(v);
          const auto at = std::lower_bound(vn.begin(), vn.end(), u) - vn.begin();
          b.csr.coeff.push_back(g.gcn_coeff()[g.offsets()[v] + at]);
        }
      }
      b.csr.offsets[i + 1] = static_cast<std::uint32_t>(b.csr.indices.size());
      if (carry_norm) b.csr.self_coeff.push_back(g.gcn_self_coeff()[v]);
    }
    b.csr.num_dst = b.num_dst;
    b.csr.num_src = b.src_ids.size();
    dst = b.src_ids;
  }
  return block;
}

/// Disjoint balanced node partition grown along BFS order: nodes are laid
/// out by BFS from random component seeds, then cut into num_clusters
/// contiguous chunks (sizes differ by at most one). Cluster ids are sorted.
inline std::vector<std::vector<NodeId>> cluster_partition(const Graph& g,
                                                          std::size_t num_clusters,
                                                          RngStream& rng) {
  const std::size_t n = g.num_nodes();
  if (num_clusters < 1 || num_clusters > n)
    throw std::invalid_argument("cluster_partition: need 1 <= num_clusters <= num_nodes");

  std::vector<NodeId> order;
  order.reserve(n);
  std::vector<char> visited(n, 0);
  std::vector<NodeId> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  rng.shuffle(pool);
  std::size_t pool_at = 0;
  std::vector<NodeId> queue;
  while (order.size() < n) {
    while (pool_at < n && visited[pool[pool_at]]) ++pool_at;
    NodeId seed = pool[pool_at];
    visited[seed] = 1;
    queue.clear();
    queue.push_back(seed);
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const NodeId v = queue[q];
      order.push_back(v);
      for (NodeId u : g.neighbors(v)) {
        if (!visited[u]) {
          visited[u] = 1;
          queue.push_back(u);
        }
      }
    }
  }

  std::vector<std::vector<NodeId>> parts(num_clusters);
  const std::size_t base = n / num_clusters;
  const std::size_t extra = n % num_clusters;
  std::size_t at = 0;
  for (std::size_t c = 0; c < num_clusters; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    parts[c].assign(order.begin() + at, order.begin() + at + len);
    std::sort(parts[c].begin(), parts[c].end());
    at += len;
  }
  return parts;
}

/// Subgraph induced by a sorted node set; local ids follow the set's order.
inline Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  std::unordered_map<NodeId, NodeId> local;
  local.reserve(nodes.size() * 2);
  for (std::size_t i = 0; i < nodes.size(); ++i) local.emplace(nodes[i], i);
  std::vector<EdgePair> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeId u : g.neighbors(nodes[i])) {
      auto it = local.find(u);
      if (it != local.end() && nodes[i] < u)
        edges.emplace_back(static_cast<NodeId>(i), it->second);
    }
  }
  return Graph::from_edges(edges, nodes.size(), /*symmetrize=*/true);
}

}  // namespace ngnn
