#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngnn/graph.hpp"
#include "ngnn/matrix.hpp"

namespace ngnn {

/// Node-classification dataset: graph + features + labels + id splits.
struct NodeDataset {
  Graph graph;
  Matrix<float> features;
  std::vector<std::int32_t> labels;
  std::vector<NodeId> train_ids;
  std::vector<NodeId> valid_ids;
  std::vector<NodeId> test_ids;

  std::size_t num_nodes() const { return graph.num_nodes(); }

  std::size_t num_classes() const {
    std::int32_t mx = -1;
    for (std::int32_t l : labels) mx = std::max(mx, l);
    return static_cast<std::size_t>(mx + 1);
  }
};

/// Link-prediction dataset: the graph holds training edges only; valid/test
/// positives are held out and ranked against fixed negative sets.
struct LinkDataset {
  Graph graph;
  Matrix<float> features;
  std::vector<EdgePair> train_pos;
  std::vector<EdgePair> valid_pos;
  std::vector<EdgePair> valid_neg;
  std::vector<EdgePair> test_pos;
  std::vector<EdgePair> test_neg;

  std::size_t num_nodes() const { return graph.num_nodes(); }
};

// ---- on-disk formats ----
// edges / edge sets: text, one "u v" pair per line, 0-based node ids
// features:          binary, magic "NGNNF1", u64 N, u64 D, N*D float32 LE
// labels:            text, one integer per line
// splits:            text, one node id per line

inline constexpr char kFeatureMagic[6] = {'N', 'G', 'N', 'N', 'F', '1'};

inline void write_edge_file(const std::filesystem::path& path, std::span<const EdgePair> edges) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const auto& [u, v] : edges) out << u << ' ' << v << '\n';
}

inline std::vector<EdgePair> read_edge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge file: " + path.string());
  std::vector<EdgePair> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long u, v;
    if (!(ss >> u >> v) || u < 0 || v < 0)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected \"u v\" with non-negative ids");
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  return edges;
}

inline void write_features(const std::filesystem::path& path, const Matrix<float>& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  const std::uint64_t n = x.rows(), d = x.cols();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(x.data()),
            static_cast<std::streamsize>(x.size() * sizeof(float)));
}

inline Matrix<float> read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file: " + path.string());
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0)
    throw std::runtime_error(path.string() + ": bad feature file magic");
  std::uint64_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&d), sizeof(d));
  if (!in) throw std::runtime_error(path.string() + ": truncated feature header");
  Matrix<float> x(n, d);
  in.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(n * d * sizeof(float)));
  if (!in) throw std::runtime_error(path.string() + ": truncated feature data");
  return x;
}

inline void write_labels(const std::filesystem::path& path, std::span<const std::int32_t> labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (std::int32_t l : labels) out << l << '\n';
}

inline std::vector<std::int32_t> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open label file: " + path.string());
  std::vector<std::int32_t> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    labels.push_back(static_cast<std::int32_t>(std::stol(line)));
  }
  return labels;
}

inline void write_id_file(const std::filesystem::path& path, std::span<const NodeId> ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (NodeId id : ids) out << id << '\n';
}

inline std::vector<NodeId> read_id_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open id file: " + path.string());
  std::vector<NodeId> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ids.push_back(static_cast<NodeId>(std::stoul(line)));
  }
  return ids;
}

/// Conventional file names inside a dataset directory.
struct DatasetPaths {
  std::filesystem::path edges, features, labels, train, valid, test;
  std::filesystem::path valid_neg, test_neg;  // link datasets only

  static DatasetPaths node_layout(const std::filesystem::path& dir) {
    return {dir / "edges.txt", dir / "features.bin", dir / "labels.txt",
            dir / "train.txt", dir / "valid.txt",    dir / "test.txt",
            {},                {}};
  }
  static DatasetPaths link_layout(const std::filesystem::path& dir) {
    return {dir / "edges.txt",     dir / "features.bin", {},
            dir / "train_pos.txt", dir / "valid_pos.txt", dir / "test_pos.txt",
            dir / "valid_neg.txt", dir / "test_neg.txt"};
  }
};

inline NodeDataset load_node_dataset(const DatasetPaths& p) {
  NodeDataset d;
  d.features = read_features(p.features);
  const std::size_t n = d.features.rows();
  d.graph = Graph::from_edges(read_edge_file(p.edges), n, /*symmetrize=*/true);
  d.labels = read_labels(p.labels);
  if (d.labels.size() != n)
    throw std::runtime_error("label count does not match feature rows");
  d.train_ids = read_id_file(p.train);
  d.valid_ids = read_id_file(p.valid);
  d.test_ids = read_id_file(p.test);
  for (const auto* ids : {&d.train_ids, &d.valid_ids, &d.test_ids})
    for (NodeId id : *ids)
      if (id >= n) throw std::runtime_error("split id out of range");
  return d;
}

inline void save_node_dataset(const NodeDataset& d, const DatasetPaths& p) {
  write_edge_file(p.edges, d.graph.undirected_edges());
  write_features(p.features, d.features);
  write_labels(p.labels, d.labels);
  write_id_file(p.train, d.train_ids);
  write_id_file(p.valid, d.valid_ids);
  write_id_file(p.test, d.test_ids);
}

inline LinkDataset load_link_dataset(const DatasetPaths& p) {
  LinkDataset d;
  d.features = read_features(p.features);
  const std::size_t n = d.features.rows();
  d.graph = Graph::from_edges(read_edge_file(p.edges), n, /*symmetrize=*/true);
  d.train_pos = read_edge_file(p.train);
  d.valid_pos = read_edge_file(p.valid);
  d.valid_neg = read_edge_file(p.valid_neg);
  d.test_pos = read_edge_file(p.test);
  d.test_neg = read_edge_file(p.test_neg);
  for (const auto* es :
       {&d.train_pos, &d.valid_pos, &d.valid_neg, &d.test_pos, &d.test_neg})
    for (const auto& [u, v] : *es)
      if (u >= n || v >= n) throw std::runtime_error("link endpoint out of range");
  return d;
}

inline void save_link_dataset(const LinkDataset& d, const DatasetPaths& p) {
  write_edge_file(p.edges, d.graph.undirected_edges());
  write_features(p.features, d.features);
  write_edge_file(p.train, d.train_pos);
  write_edge_file(p.valid, d.valid_pos);
  write_edge_file(p.valid_neg, d.valid_neg);
  write_edge_file(p.test, d.test_pos);
  write_edge_file(p.test_neg, d.test_neg);
}

/// Consistently relabels graph, features, labels and splits. perm maps old
/// id -> new id and must be a bijection on [0, N).
inline NodeDataset permute_nodes(const NodeDataset& d, std::span<const NodeId> perm) {
  const std::size_t n = d.num_nodes();
  if (perm.size() != n) throw std::invalid_argument("permute_nodes: wrong permutation length");
  std::vector<char> hit(n, 0);
  for (NodeId p : perm) {
    if (p >= n || hit[p]) throw std::invalid_argument("permute_nodes: not a bijection");
    hit[p] = 1;
  }
  NodeDataset out;
  std::vector<EdgePair> edges = d.graph.undirected_edges();
  for (auto& [u, v] : edges) {
    u = perm[u];
    v = perm[v];
  }
  out.graph = Graph::from_edges(edges, n, /*symmetrize=*/true);
  if (d.graph.normalized()) out.graph = gcn_normalize(out.graph);
  out.features = Matrix<float>(n, d.features.cols());
  out.labels.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::copy(d.features.row(v), d.features.row(v) + d.features.cols(),
              out.features.row(perm[v]));
    out.labels[perm[v]] = d.labels[v];
  }
  auto map_ids = [&](const std::vector<NodeId>& ids) {
    std::vector<NodeId> m;
    m.reserve(ids.size());
    for (NodeId id : ids) m.push_back(perm[id]);
    return m;
  };
  out.train_ids = map_ids(d.train_ids);
  out.valid_ids = map_ids(d.valid_ids);
  out.test_ids = map_ids(d.test_ids);
  return out;
}

}  // namespace ngnn
