#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "ngnn/grad_check.hpp"
#include "ngnn/graph.hpp"
#include "ngnn/layers.hpp"
#include "ngnn/rng.hpp"
#include "oracles.hpp"

using ngnn::Activation;
using ngnn::CsrView;
using ngnn::EdgePair;
using ngnn::GatLayer;
using ngnn::GcnLayer;
using ngnn::Graph;
using ngnn::Matrix;
using ngnn::NgnnBlock;
using ngnn::NodeId;
using ngnn::ParamBinder;
using ngnn::SageLayer;
using ngnn::Tape;

namespace {

template <class Real>
GatLayer<Real> random_gat_layer(std::size_t in, std::size_t out, std::size_t heads,
                                std::mt19937_64& eng) {
  GatLayer<Real> l;
  l.heads = heads;
  const std::size_t f = out / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    l.w.push_back(oracle::random_matrix<Real>(in, f, eng, -0.7, 0.7));
    l.a_src.push_back(oracle::random_matrix<Real>(f, 1, eng, -0.7, 0.7));
    l.a_dst.push_back(oracle::random_matrix<Real>(f, 1, eng, -0.7, 0.7));
  }
  l.bias = oracle::random_matrix<Real>(1, out, eng, -0.5, 0.5);
  return l;
}

}  // namespace

TEST(SageForward, IdentitySelfWeightPassesFeaturesThrough) {
  std::mt19937_64 eng(1);
  Graph g = oracle::random_graph(8, 0.4, eng);
  auto h = oracle::random_matrix<double>(8, 3, eng);
  Tape<double> t;
  ParamBinder<double> p(t);
  SageLayer<double> layer{Matrix<double>::identity(3), Matrix<double>(3, 3), Matrix<double>(1, 3)};
  auto out = ngnn::sage_forward(t, bind(p, layer), g.view(), t.input(h));
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), h), 1e-15);
}

TEST(SageForward, StarGraphCenterGetsLeafMean) {
  std::vector<EdgePair> edges{{0, 1}, {0, 2}, {0, 3}};
  Graph g = Graph::from_edges(edges, 4, true);
  Matrix<double> h = Matrix<double>::from_rows({{0, 0}, {1, 2}, {3, 4}, {5, 6}});
  Tape<double> t;
  ParamBinder<double> p(t);
  SageLayer<double> layer{Matrix<double>(2, 2), Matrix<double>::identity(2), Matrix<double>(1, 2)};
  auto out = ngnn::sage_forward(t, bind(p, layer), g.view(), t.input(h));
  EXPECT_DOUBLE_EQ(t.value(out)(0, 0), 3.0);  // mean of 1,3,5
  EXPECT_DOUBLE_EQ(t.value(out)(0, 1), 4.0);  // mean of 2,4,6
}

TEST(SageForward, ZeroDegreeNodeUsesZeroNeighborTerm) {
  std::vector<EdgePair> edges{{0, 1}};
  Graph g = Graph::from_edges(edges, 3, true);
  Matrix<double> h = Matrix<double>::from_rows({{1}, {2}, {7}});
  Tape<double> t;
  ParamBinder<double> p(t);
  SageLayer<double> layer{Matrix<double>(1, 1), Matrix<double>::identity(1), Matrix<double>(1, 1)};
  auto out = ngnn::sage_forward(t, bind(p, layer), g.view(), t.input(h));
  EXPECT_DOUBLE_EQ(t.value(out)(2, 0), 0.0);
}

TEST(SageForward, MatchesDenseOracleOnRandomGraph) {
  std::mt19937_64 eng(2);
  Graph g = oracle::random_graph(6, 0.5, eng);
  auto h = oracle::random_matrix<double>(6, 4, eng);
  SageLayer<double> layer{oracle::random_matrix<double>(4, 3, eng),
                          oracle::random_matrix<double>(4, 3, eng),
                          oracle::random_matrix<double>(1, 3, eng)};
  Tape<double> t;
  ParamBinder<double> p(t);
  auto out = ngnn::sage_forward(t, bind(p, layer), g.view(), t.input(h));
  auto expected = oracle::sage_layer(g, h, layer.w_self, layer.w_neigh, layer.bias);
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), expected), 1e-12);
}

TEST(GcnForward, IsolatedNodeWithIdentityWeightIsIdentity) {
  Graph g = ngnn::gcn_normalize(Graph::from_edges(std::vector<EdgePair>{}, 1, true));
  Matrix<double> h = Matrix<double>::from_rows({{2.5, -1.0}});
  Tape<double> t;
  ParamBinder<double> p(t);
  GcnLayer<double> layer{Matrix<double>::identity(2), Matrix<double>(1, 2)};
  auto out = ngnn::gcn_forward(t, bind(p, layer), g.view(), t.input(h));
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), h), 1e-15);
}

TEST(GcnForward, TwoNodeEdgeAveragesWithSelf) {
  Graph g = ngnn::gcn_normalize(Graph::from_edges(std::vector<EdgePair>{{0, 1}}, 2, true));
  Matrix<double> h = Matrix<double>::from_rows({{1.0}, {3.0}});
  Tape<double> t;
  ParamBinder<double> p(t);
  GcnLayer<double> layer{Matrix<double>::identity(1), Matrix<double>(1, 1)};
  auto out = ngnn::gcn_forward(t, bind(p, layer), g.view(), t.input(h));
  EXPECT_DOUBLE_EQ(t.value(out)(0, 0), 0.5 * (1.0 + 3.0));
  EXPECT_DOUBLE_EQ(t.value(out)(1, 0), 0.5 * (1.0 + 3.0));
}

TEST(GcnForward, RequiresNormalization) {
  Graph g = Graph::from_edges(std::vector<EdgePair>{{0, 1}}, 2, true);
  Tape<double> t;
  ParamBinder<double> p(t);
  GcnLayer<double> layer{Matrix<double>::identity(1), Matrix<double>(1, 1)};
  EXPECT_THROW(ngnn::gcn_forward(t, bind(p, layer), g.view(), t.input(Matrix<double>(2, 1))),
               std::invalid_argument);
}

TEST(GcnForward, MatchesDenseOracleOnRandomGraph) {
  std::mt19937_64 eng(3);
  Graph g = ngnn::gcn_normalize(oracle::random_graph(7, 0.4, eng));
  auto h = oracle::random_matrix<double>(7, 5, eng);
  GcnLayer<double> layer{oracle::random_matrix<double>(5, 2, eng),
                         oracle::random_matrix<double>(1, 2, eng)};
  Tape<double> t;
  ParamBinder<double> p(t);
  auto out = ngnn::gcn_forward(t, bind(p, layer), g.view(), t.input(h));
  auto expected = oracle::gcn_layer(g, h, layer.weight, layer.bias);
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), expected), 1e-12);
}

TEST(GatForward, IdenticalFeaturesGiveUniformAttention) {
  std::mt19937_64 eng(4);
  Graph g = oracle::random_graph(6, 0.6, eng);
  Matrix<double> h(6, 3, 1.0);  // every node identical
  GatLayer<double> layer = random_gat_layer<double>(3, 4, 2, eng);
  for (std::size_t head = 0; head < 2; ++head) {
    ngnn::Csr aug;
    Matrix<double> alpha = ngnn::gat_attention_weights(layer, head, g.view(), h, &aug);
    for (std::size_t d = 0; d < aug.num_dst; ++d) {
      const std::uint32_t lo = aug.offsets[d], hi = aug.offsets[d + 1];
      const double uniform = 1.0 / static_cast<double>(hi - lo);
      for (std::uint32_t e = lo; e < hi; ++e) EXPECT_NEAR(alpha(e, 0), uniform, 1e-12);
    }
  }
}

TEST(GatForward, AttentionRowsSumToOnePerHead) {
  std::mt19937_64 eng(5);
  Graph g = oracle::random_graph(9, 0.4, eng);
  auto h = oracle::random_matrix<double>(9, 4, eng);
  GatLayer<double> layer = random_gat_layer<double>(4, 6, 3, eng);
  for (std::size_t head = 0; head < 3; ++head) {
    ngnn::Csr aug;
    Matrix<double> alpha = ngnn::gat_attention_weights(layer, head, g.view(), h, &aug);
    for (std::size_t d = 0; d < aug.num_dst; ++d) {
      double sum = 0.0;
      for (std::uint32_t e = aug.offsets[d]; e < aug.offsets[d + 1]; ++e) sum += alpha(e, 0);
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(GatForward, LoneNodeReducesToLinearLayer) {
  Graph g = Graph::from_edges(std::vector<EdgePair>{}, 1, true);
  std::mt19937_64 eng(6);
  Matrix<double> h = oracle::random_matrix<double>(1, 3, eng);
  GatLayer<double> layer = random_gat_layer<double>(3, 2, 1, eng);
  Tape<double> t;
  ParamBinder<double> p(t);
  auto out = ngnn::gat_forward(t, bind(p, layer), g.view(), t.input(h));
  // Only the self loop participates: out = h W + b.
  auto expected = oracle::add_bias(oracle::matmul(h, layer.w[0]), layer.bias);
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), expected), 1e-12);
}

TEST(GatForward, MatchesDenseOracleOnRandomGraph) {
  std::mt19937_64 eng(7);
  Graph g = oracle::random_graph(5, 0.6, eng);
  auto h = oracle::random_matrix<double>(5, 3, eng);
  GatLayer<double> layer = random_gat_layer<double>(3, 4, 2, eng);
  Tape<double> t;
  ParamBinder<double> p(t);
  auto out = ngnn::gat_forward(t, bind(p, layer), g.view(), t.input(h));
  auto expected = oracle::gat_layer(g, h, layer);
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), expected), 1e-6);
}

TEST(NgnnForward, IdentityBlockIsIdentity) {
  std::mt19937_64 eng(8);
  auto z = oracle::random_matrix<double>(5, 4, eng);
  NgnnBlock<double> block;
  block.layers.push_back({Matrix<double>::identity(4), Matrix<double>(1, 4), Activation::identity});
  Tape<double> t;
  ParamBinder<double> p(t);
  auto out = ngnn::ngnn_forward(t, bind(p, block), t.input(z));
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), z), 1e-15);
}

TEST(NgnnForward, ReluIdentityBlockKeepsNonNegativeInput) {
  std::mt19937_64 eng(9);
  auto z = oracle::random_matrix<double>(4, 3, eng, 0.0, 2.0);  // non-negative
  NgnnBlock<double> block;
  block.layers.push_back({Matrix<double>::identity(3), Matrix<double>(1, 3), Activation::relu});
  Tape<double> t;
  ParamBinder<double> p(t);
  auto out = ngnn::ngnn_forward(t, bind(p, block), t.input(z));
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), z), 1e-15);
}

TEST(NgnnForward, TwoLayerBlockMatchesHandComposition) {
  // "1-relu+1-sigmoid": relu dense layer then sigmoid dense layer.
  std::mt19937_64 eng(10);
  auto z = oracle::random_matrix<double>(6, 4, eng);
  NgnnBlock<double> block;
  block.layers.push_back(
      {oracle::random_matrix<double>(4, 4, eng), oracle::random_matrix<double>(1, 4, eng),
       Activation::relu});
  block.layers.push_back(
      {oracle::random_matrix<double>(4, 4, eng), oracle::random_matrix<double>(1, 4, eng),
       Activation::sigmoid});
  Tape<double> t;
  ParamBinder<double> p(t);
  auto out = ngnn::ngnn_forward(t, bind(p, block), t.input(z));

  auto g1 = oracle::add_bias(oracle::matmul(z, block.layers[0].weight), block.layers[0].bias);
  for (std::size_t i = 0; i < g1.size(); ++i) g1.data()[i] = std::max(0.0, g1.data()[i]);
  auto g2 = oracle::add_bias(oracle::matmul(g1, block.layers[1].weight), block.layers[1].bias);
  for (std::size_t i = 0; i < g2.size(); ++i) g2.data()[i] = 1.0 / (1.0 + std::exp(-g2.data()[i]));
  EXPECT_LT(ngnn::max_abs_diff(t.value(out), g2), 1e-12);
}

TEST(NgnnForward, WidthMismatchThrows) {
  NgnnBlock<double> block;
  block.layers.push_back({Matrix<double>::identity(3), Matrix<double>(1, 3), Activation::relu});
  Tape<double> t;
  ParamBinder<double> p(t);
  EXPECT_THROW(ngnn::ngnn_forward(t, bind(p, block), t.input(Matrix<double>(2, 5))),
               std::invalid_argument);
}

TEST(LayerParamCount, MatchesReportedSageSizes) {
  SageLayer<float> a{Matrix<float>(100, 256), Matrix<float>(100, 256), Matrix<float>(1, 256)};
  EXPECT_EQ(ngnn::layer_param_count(a), 51456u);  // 2*100*256 + 256
  SageLayer<float> b{Matrix<float>(256, 47), Matrix<float>(256, 47), Matrix<float>(1, 47)};
  EXPECT_EQ(ngnn::layer_param_count(b), 24111u);  // 2*256*47 + 47
}

TEST(LayerParamCount, TwoLayerBlockAtWidth256) {
  NgnnBlock<float> block;
  for (int i = 0; i < 2; ++i)
    block.layers.push_back({Matrix<float>(256, 256), Matrix<float>(1, 256), Activation::relu});
  EXPECT_EQ(ngnn::layer_param_count(block), 131584u);  // 2*(256^2 + 256)
}

TEST(LayerParamCount, GcnAndGatFormulas) {
  GcnLayer<float> g{Matrix<float>(100, 256), Matrix<float>(1, 256)};
  EXPECT_EQ(ngnn::layer_param_count(g), 100u * 256 + 256);
  std::mt19937_64 eng(11);
  GatLayer<float> gat = random_gat_layer<float>(10, 8, 4, eng);
  // per head: 10*2 weights + 2 + 2 attention; bias 8.
  EXPECT_EQ(ngnn::layer_param_count(gat), 4 * (20 + 2 + 2) + 8u);
}

// Every layer forward (and the block) must pass 64-bit finite-difference
// checks, including gradients with respect to all parameters.
TEST(GradientSuite, SageLayerPassesFiniteDifferenceChecks) {
  std::mt19937_64 eng(12);
  for (int trial = 0; trial < 3; ++trial) {
    Graph g = oracle::random_graph(6, 0.5, eng);
    auto h = oracle::random_matrix<double>(6, 3, eng);
    auto ws = oracle::random_matrix<double>(3, 2, eng);
    auto wn = oracle::random_matrix<double>(3, 2, eng);
    auto b = oracle::random_matrix<double>(1, 2, eng);
    const double err = ngnn::finite_diff_check<double>(
        [&](Tape<double>& t, std::span<const Tape<double>::Tensor> in) {
          ngnn::SageLayerRef<double> ref{in[1], in[2], in[3]};
          auto out = ngnn::sage_forward(t, ref, g.view(), in[0]);
          return t.sum(t.mul(out, out));
        },
        {h, ws, wn, b}, 1e-5);
    EXPECT_LT(err, 1e-5);
  }
}

TEST(GradientSuite, GcnLayerPassesFiniteDifferenceChecks) {
  std::mt19937_64 eng(13);
  for (int trial = 0; trial < 3; ++trial) {
    Graph g = ngnn::gcn_normalize(oracle::random_graph(6, 0.5, eng));
    auto h = oracle::random_matrix<double>(6, 3, eng);
    auto w = oracle::random_matrix<double>(3, 2, eng);
    auto b = oracle::random_matrix<double>(1, 2, eng);
    const double err = ngnn::finite_diff_check<double>(
        [&](Tape<double>& t, std::span<const Tape<double>::Tensor> in) {
          ngnn::GcnLayerRef<double> ref{in[1], in[2]};
          auto out = ngnn::gcn_forward(t, ref, g.view(), in[0]);
          return t.sum(t.mul(out, out));
        },
        {h, w, b}, 1e-5);
    EXPECT_LT(err, 1e-5);
  }
}

TEST(GradientSuite, GatLayerPassesFiniteDifferenceChecks) {
  std::mt19937_64 eng(14);
  for (int trial = 0; trial < 2; ++trial) {
    Graph g = oracle::random_graph(5, 0.6, eng);
    auto h = oracle::random_matrix<double>(5, 3, eng);
    auto w0 = oracle::random_matrix<double>(3, 2, eng);
    auto w1 = oracle::random_matrix<double>(3, 2, eng);
    auto as0 = oracle::random_matrix<double>(2, 1, eng);
    auto as1 = oracle::random_matrix<double>(2, 1, eng);
    auto ad0 = oracle::random_matrix<double>(2, 1, eng);
    auto ad1 = oracle::random_matrix<double>(2, 1, eng);
    auto b = oracle::random_matrix<double>(1, 4, eng);
    const double err = ngnn::finite_diff_check<double>(
        [&](Tape<double>& t, std::span<const Tape<double>::Tensor> in) {
          ngnn::GatLayerRef<double> ref;
          ref.heads = 2;
          ref.w = {in[1], in[2]};
          ref.a_src = {in[3], in[4]};
          ref.a_dst = {in[5], in[6]};
          ref.bias = in[7];
          auto out = ngnn::gat_forward(t, ref, g.view(), in[0]);
          return t.sum(t.mul(out, out));
        },
        {h, w0, w1, as0, as1, ad0, ad1, b}, 1e-5);
    EXPECT_LT(err, 1e-5);
  }
}

TEST(GradientSuite, NgnnBlockPassesFiniteDifferenceChecks) {
  std::mt19937_64 eng(15);
  auto z = oracle::random_matrix<double>(5, 3, eng);
  auto w1 = oracle::random_matrix<double>(3, 3, eng);
  auto b1 = oracle::random_matrix<double>(1, 3, eng);
  auto w2 = oracle::random_matrix<double>(3, 3, eng);
  auto b2 = oracle::random_matrix<double>(1, 3, eng);
  const double err = ngnn::finite_diff_check<double>(
      [&](Tape<double>& t, std::span<const Tape<double>::Tensor> in) {
        ngnn::NgnnBlockRef<double> ref;
        ref.layers.push_back({in[1], in[2], Activation::relu});
        ref.layers.push_back({in[3], in[4], Activation::sigmoid});
        auto out = ngnn::ngnn_forward(t, ref, in[0]);
        return t.sum(t.mul(out, out));
      },
      {z, w1, b1, w2, b2}, 1e-5);
  EXPECT_LT(err, 1e-5);
}

// Permuting the node order of inputs permutes outputs identically.
TEST(Equivariance, LayerForwardsCommuteWithPermutation) {
  std::mt19937_64 eng(16);
  const std::size_t n = 12;
  Graph g = oracle::random_graph(n, 0.3, eng);
  auto h = oracle::random_matrix<double>(n, 3, eng);
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), eng);

  // Permuted graph and features.
  auto edges = g.undirected_edges();
  for (auto& [u, v] : edges) {
    u = perm[u];
    v = perm[v];
  }
  Graph pg = Graph::from_edges(edges, n, true);
  Matrix<double> ph(n, 3);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t c = 0; c < 3; ++c) ph(perm[v], c) = h(v, c);

  SageLayer<double> sage{oracle::random_matrix<double>(3, 2, eng),
                         oracle::random_matrix<double>(3, 2, eng),
                         oracle::random_matrix<double>(1, 2, eng)};
  GatLayer<double> gat = random_gat_layer<double>(3, 4, 2, eng);
  GcnLayer<double> gcn{oracle::random_matrix<double>(3, 2, eng),
                       oracle::random_matrix<double>(1, 2, eng)};

  auto check = [&](auto&& forward, std::size_t out_cols) {
    Tape<double> t1, t2;
    auto out = forward(t1, g, h);
    auto pout = forward(t2, pg, ph);
    double worst = 0.0;
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t c = 0; c < out_cols; ++c)
        worst = std::max(worst,
                         std::abs(t1.value(out)(v, c) - t2.value(pout)(perm[v], c)));
    EXPECT_LT(worst, 1e-10);
  };

  check(
      [&](Tape<double>& t, const Graph& graph, const Matrix<double>& x) {
        ParamBinder<double> p(t);
        return ngnn::sage_forward(t, bind(p, sage), graph.view(), t.input(x));
      },
      2);
  check(
      [&](Tape<double>& t, const Graph& graph, const Matrix<double>& x) {
        ParamBinder<double> p(t);
        Graph norm = ngnn::gcn_normalize(graph);
        auto view = norm.view();
        auto out = ngnn::gcn_forward(t, bind(p, gcn), view, t.input(x));
        return out;
      },
      2);
  check(
      [&](Tape<double>& t, const Graph& graph, const Matrix<double>& x) {
        ParamBinder<double> p(t);
        return ngnn::gat_forward(t, bind(p, gat), graph.view(), t.input(x));
      },
      4);
}
