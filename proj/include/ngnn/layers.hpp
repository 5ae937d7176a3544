#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ngnn/matrix.hpp"
#include "ngnn/tape.hpp"

namespace ngnn {

/// One feedforward sublayer of an NGNN block: square weight, row bias, and
/// its activation.
template <class Real>
struct DenseLayer {
  Matrix<Real> weight;  // in x out
  Matrix<Real> bias;    // 1 x out
  Activation act = Activation::identity;
};

/// The non-linear feedforward stack inserted inside a GNN layer. All weights
/// are square with side equal to the host layer's output width; the block's
/// final activation acts as the layer activation.
template <class Real>
struct NgnnBlock {
  std::vector<DenseLayer<Real>> layers;

  bool empty() const { return layers.empty(); }
  std::size_t depth() const { return layers.size(); }
  std::size_t width() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
};

template <class Real>
struct GcnLayer {
  Matrix<Real> weight;  // in x out
  Matrix<Real> bias;    // 1 x out
};

template <class Real>
struct SageLayer {
  Matrix<Real> w_self;   // in x out
  Matrix<Real> w_neigh;  // in x out
  Matrix<Real> bias;     // 1 x out
};

template <class Real>
struct GatLayer {
  std::size_t heads = 1;
  std::vector<Matrix<Real>> w;      // per head: in x (out/heads)
  std::vector<Matrix<Real>> a_src;  // per head: (out/heads) x 1
  std::vector<Matrix<Real>> a_dst;  // per head: (out/heads) x 1
  Matrix<Real> bias;                // 1 x out, added after head concat
};

// ---- parameter accounting ----

template <class Real>
std::size_t layer_param_count(const GcnLayer<Real>& l) {
  return l.weight.size() + l.bias.size();
}

template <class Real>
std::size_t layer_param_count(const SageLayer<Real>& l) {
  return l.w_self.size() + l.w_neigh.size() + l.bias.size();
}

template <class Real>
std::size_t layer_param_count(const GatLayer<Real>& l) {
  std::size_t n = l.bias.size();
  for (std::size_t h = 0; h < l.heads; ++h)
    n += l.w[h].size() + l.a_src[h].size() + l.a_dst[h].size();
  return n;
}

template <class Real>
std::size_t layer_param_count(const NgnnBlock<Real>& b) {
  std::size_t n = 0;
  for (const auto& layer : b.layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

// ---- tape bindings ----
// Forwards consume parameters as tape tensors so gradients flow to them.
// ParamBinder registers each matrix on the tape and records the pairing for
// the optimizer to read gradients back.

template <class Real>
struct ParamBinder {
  explicit ParamBinder(Tape<Real>& tape) : tape_(&tape) {}

  typename Tape<Real>::Tensor operator()(const Matrix<Real>& m) {
    auto t = tape_->input(m, true);
    bound.emplace_back(&m, t);
    return t;
  }

  std::vector<std::pair<const Matrix<Real>*, typename Tape<Real>::Tensor>> bound;

 private:
  Tape<Real>* tape_;
};

template <class Real>
struct DenseLayerRef {
  typename Tape<Real>::Tensor weight, bias;
  Activation act = Activation::identity;
};

template <class Real>
struct NgnnBlockRef {
  std::vector<DenseLayerRef<Real>> layers;
};

template <class Real>
struct GcnLayerRef {
  typename Tape<Real>::Tensor weight, bias;
};

template <class Real>
struct SageLayerRef {
  typename Tape<Real>::Tensor w_self, w_neigh, bias;
};

template <class Real>
struct GatLayerRef {
  std::size_t heads = 1;
  std::vector<typename Tape<Real>::Tensor> w, a_src, a_dst;
  typename Tape<Real>::Tensor bias;
};

template <class Real>
NgnnBlockRef<Real> bind(ParamBinder<Real>& p, const NgnnBlock<Real>& b) {
  NgnnBlockRef<Real> r;
  for (const auto& l : b.layers) r.layers.push_back({p(l.weight), p(l.bias), l.act});
  return r;
}

template <class Real>
GcnLayerRef<Real> bind(ParamBinder<Real>& p, const GcnLayer<Real>& l) {
  return {p(l.weight), p(l.bias)};
}

template <class Real>
SageLayerRef<Real> bind(ParamBinder<Real>& p, const SageLayer<Real>& l) {
  return {p(l.w_self), p(l.w_neigh), p(l.bias)};
}

template <class Real>
GatLayerRef<Real> bind(ParamBinder<Real>& p, const GatLayer<Real>& l) {
  GatLayerRef<Real> r;
  r.heads = l.heads;
  for (std::size_t h = 0; h < l.heads; ++h) {
    r.w.push_back(p(l.w[h]));
    r.a_src.push_back(p(l.a_src[h]));
    r.a_dst.push_back(p(l.a_dst[h]));
  }
  r.bias = p(l.bias);
  return r;
}

// ---- forwards ----
// Layer ops apply no activation of their own; the model applies either the
// attached NGNN block or the inter-layer activation.

/// g^0 = z;  g^i = act_i(g^{i-1} w^i + b^i);  returns g^k.
template <class Real>
typename Tape<Real>::Tensor ngnn_forward(Tape<Real>& tape, const NgnnBlockRef<Real>& block,
                                         typename Tape<Real>::Tensor z) {
  if (!block.layers.empty() && z.cols != block.layers.front().weight.rows)
    throw std::invalid_argument("ngnn_forward: input width does not match block width");
  auto g = z;
  for (const DenseLayerRef<Real>& layer : block.layers)
    g = tape.activation(tape.add_bias(tape.matmul(g, layer.weight), layer.bias), layer.act);
  return g;
}

/// out = A_hat h W + b, with A_hat the self-loop normalized adjacency carried
/// by the view's coefficients.
template <class Real>
typename Tape<Real>::Tensor gcn_forward(Tape<Real>& tape, const GcnLayerRef<Real>& layer,
                                        const CsrView& view, typename Tape<Real>::Tensor h) {
  if (!view.has_self_coeff())
    throw std::invalid_argument("gcn_forward: view lacks normalization coefficients");
  if (h.cols != layer.weight.rows)
    throw std::invalid_argument("gcn_forward: feature width mismatch");
  return tape.add_bias(tape.matmul(tape.spmm(view, h), layer.weight), layer.bias);
}

/// out[v] = h[v] W_self + mean_{u in N(v)} h[u] W_neigh + b; a zero-degree
/// node contributes zero for the neighbor term.
template <class Real>
typename Tape<Real>::Tensor sage_forward(Tape<Real>& tape, const SageLayerRef<Real>& layer,
                                         const CsrView& view, typename Tape<Real>::Tensor h) {
  if (h.cols != layer.w_self.rows)
    throw std::invalid_argument("sage_forward: feature width mismatch");
  auto self_h = tape.slice_rows(h, view.num_dst);
  auto mean_h = tape.neighbor_mean(view, h);
  return tape.add_bias(
      tape.add(tape.matmul(self_h, layer.w_self), tape.matmul(mean_h, layer.w_neigh)),
      layer.bias);
}

namespace detail {

/// Appends one self edge to the end of every destination's segment. Requires
/// the block prefix convention (dst row v's features live at source row v).
inline Csr augment_with_self_loops(const CsrView& view) {
  if (view.num_dst > view.num_src)
    throw std::invalid_argument("augment_with_self_loops: num_dst exceeds num_src");
  Csr out;
  out.num_src = view.num_src;
  out.num_dst = view.num_dst;
  out.offsets.reserve(view.num_dst + 1);
  out.indices.reserve(view.num_edges() + view.num_dst);
  out.offsets.push_back(0);
  for (std::size_t d = 0; d < view.num_dst; ++d) {
    for (std::uint32_t e = view.offsets[d]; e < view.offsets[d + 1]; ++e)
      out.indices.push_back(view.indices[e]);
    out.indices.push_back(static_cast<std::uint32_t>(d));
    out.offsets.push_back(static_cast<std::uint32_t>(out.indices.size()));
  }
  return out;
}

}  // namespace detail

/// Multi-head attention over N(v) + {v}. Per head: scores LeakyReLU(0.2) of
/// a_src.(h_u W) + a_dst.(h_v W), softmax over the in-neighborhood, weighted
/// sum of transformed sources. Heads are concatenated, then the shared bias
/// is added.
template <class Real>
typename Tape<Real>::Tensor gat_forward(Tape<Real>& tape, const GatLayerRef<Real>& layer,
                                        const CsrView& view, typename Tape<Real>::Tensor h) {
  if (layer.heads == 0 || layer.w.size() != layer.heads)
    throw std::invalid_argument("gat_forward: malformed head parameters");
  if (h.cols != layer.w[0].rows)
    throw std::invalid_argument("gat_forward: feature width mismatch");
  const CsrView aug = tape.own(detail::augment_with_self_loops(view));
  std::vector<typename Tape<Real>::Tensor> head_outs;
  head_outs.reserve(layer.heads);
  for (std::size_t k = 0; k < layer.heads; ++k) {
    auto z = tape.matmul(h, layer.w[k]);  // num_src x f
    auto s_src = tape.matmul(z, layer.a_src[k]);
    auto s_dst = tape.matmul(tape.slice_rows(z, view.num_dst), layer.a_dst[k]);
    auto e = tape.edge_score_sum(aug, s_src, s_dst);
    auto alpha = tape.edge_softmax(aug, tape.activation(e, Activation::leaky_relu));
    head_outs.push_back(tape.edge_weighted_sum(aug, alpha, z));
  }
  return tape.add_bias(tape.concat_cols(head_outs), layer.bias);
}

/// Attention weights of one head over the augmented neighborhood, for
/// diagnostics and invariant checks (rows of each destination sum to 1).
template <class Real>
Matrix<Real> gat_attention_weights(const GatLayer<Real>& layer, std::size_t head,
                                   const CsrView& view, const Matrix<Real>& h, Csr* aug_out) {
  Tape<Real> tape;
  ParamBinder<Real> binder(tape);
  auto href = tape.input(h, false);
  Csr aug = detail::augment_with_self_loops(view);
  auto z = tape.matmul(href, binder(layer.w[head]));
  auto s_src = tape.matmul(z, binder(layer.a_src[head]));
  auto s_dst = tape.matmul(tape.slice_rows(z, view.num_dst), binder(layer.a_dst[head]));
  auto e = tape.edge_score_sum(aug.view(), s_src, s_dst);
  auto alpha = tape.edge_softmax(aug.view(), tape.activation(e, Activation::leaky_relu));
  if (aug_out) *aug_out = aug;
  return tape.value(alpha);
}

}  // namespace ngnn
