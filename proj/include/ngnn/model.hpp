#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ngnn/layers.hpp"
#include "ngnn/matrix.hpp"
#include "ngnn/ngnn_spec.hpp"
#include "ngnn/rng.hpp"
#include "ngnn/tape.hpp"

namespace ngnn {

enum class Arch { gcn, sage, gat };
enum class NgnnPosition { none, input, hidden, output, all };

inline const char* to_string(Arch a) {
  switch (a) {
    case Arch::gcn: return "gcn";
    case Arch::sage: return "sage";
    case Arch::gat: return "gat";
  }
  return "?";
}

inline Arch arch_from_string(std::string_view s) {
  if (s == "gcn") return Arch::gcn;
  if (s == "sage") return Arch::sage;
  if (s == "gat") return Arch::gat;
  throw std::invalid_argument("unknown architecture: " + std::string(s));
}

inline const char* to_string(NgnnPosition p) {
  switch (p) {
    case NgnnPosition::none: return "none";
    case NgnnPosition::input: return "input";
    case NgnnPosition::hidden: return "hidden";
    case NgnnPosition::output: return "output";
    case NgnnPosition::all: return "all";
  }
  return "?";
}

inline NgnnPosition position_from_string(std::string_view s) {
  if (s == "none") return NgnnPosition::none;
  if (s == "input") return NgnnPosition::input;
  if (s == "hidden") return NgnnPosition::hidden;
  if (s == "output") return NgnnPosition::output;
  if (s == "all") return NgnnPosition::all;
  throw std::invalid_argument("unknown ngnn position: " + std::string(s));
}

/// Architecture description for an L-layer stack. Non-final layers emit
/// hidden_dim and apply ReLU (or the attached block); the final layer emits
/// out_dim logits with no activation of its own.
struct ModelConfig {
  Arch arch = Arch::gcn;
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t out_dim = 0;
  std::size_t num_layers = 2;
  std::size_t heads = 1;  // gat only; the final layer always uses one head
  NgnnPosition ngnn_position = NgnnPosition::none;
  std::string ngnn_spec;  // required when position != none
  double dropout = 0.0;

  std::size_t layer_in(std::size_t i) const { return i == 0 ? in_dim : hidden_dim; }
  std::size_t layer_out(std::size_t i) const { return i + 1 == num_layers ? out_dim : hidden_dim; }
  std::size_t layer_heads(std::size_t i) const {
    return (arch == Arch::gat && i + 1 < num_layers) ? heads : 1;
  }

  /// Layer indices that receive an NGNN block under the position policy.
  std::vector<std::size_t> attached_layers() const {
    std::vector<std::size_t> at;
    switch (ngnn_position) {
      case NgnnPosition::none: break;
      case NgnnPosition::input: at.push_back(0); break;
      case NgnnPosition::hidden:
        for (std::size_t i = 1; i + 1 < num_layers; ++i) at.push_back(i);
        break;
      case NgnnPosition::output: at.push_back(num_layers - 1); break;
      case NgnnPosition::all:
        for (std::size_t i = 0; i < num_layers; ++i) at.push_back(i);
        break;
    }
    return at;
  }

  void validate() const {
    if (num_layers < 2) throw std::invalid_argument("ModelConfig: num_layers must be >= 2");
    if (in_dim == 0 || hidden_dim == 0 || out_dim == 0)
      throw std::invalid_argument("ModelConfig: dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("ModelConfig: dropout must be in [0,1)");
    if (arch == Arch::gat) {
      if (heads == 0) throw std::invalid_argument("ModelConfig: heads must be positive");
      if (hidden_dim % heads != 0)
        throw std::invalid_argument("ModelConfig: hidden_dim must be divisible by heads");
    }
    if (ngnn_position != NgnnPosition::none) parse_ngnn_spec(ngnn_spec);
  }
};

/// A GNN layer plus its optional in-layer feedforward block.
template <class Real>
struct GnnLayer {
  std::variant<GcnLayer<Real>, SageLayer<Real>, GatLayer<Real>> impl;
  NgnnBlock<Real> block;  // empty when no block is attached
};

namespace detail {

template <class Real>
Matrix<Real> xavier_uniform(std::size_t rows, std::size_t cols, RngStream rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<Real> m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<Real>(rng.uniform_range(-limit, limit));
  return m;
}

}  // namespace detail

/// L-layer model with NGNN blocks attached per the position policy.
template <class Real>
class Model {
 public:
  Model() = default;
  Model(ModelConfig cfg, std::vector<GnnLayer<Real>> layers)
      : cfg_(std::move(cfg)), layers_(std::move(layers)) {}

  const ModelConfig& config() const { return cfg_; }
  std::vector<GnnLayer<Real>>& layers() { return layers_; }
  const std::vector<GnnLayer<Real>>& layers() const { return layers_; }

  struct ParamRef {
    std::string name;
    Matrix<Real>* tensor;
  };

  /// Registry of all trainable matrices, in a deterministic order (layer by
  /// layer, GNN parameters first, then the attached block).
  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string prefix = "layer" + std::to_string(i) + ".";
      std::visit(
          [&](auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, GcnLayer<Real>>) {
              out.push_back({prefix + "weight", &l.weight});
              out.push_back({prefix + "bias", &l.bias});
            } else if constexpr (std::is_same_v<L, SageLayer<Real>>) {
              out.push_back({prefix + "w_self", &l.w_self});
              out.push_back({prefix + "w_neigh", &l.w_neigh});
              out.push_back({prefix + "bias", &l.bias});
            } else {
              for (std::size_t h = 0; h < l.heads; ++h) {
                const std::string hp = prefix + "head" + std::to_string(h) + ".";
                out.push_back({hp + "w", &l.w[h]});
                out.push_back({hp + "a_src", &l.a_src[h]});
                out.push_back({hp + "a_dst", &l.a_dst[h]});
              }
              out.push_back({prefix + "bias", &l.bias});
            }
          },
          layers_[i].impl);
      for (std::size_t k = 0; k < layers_[i].block.layers.size(); ++k) {
        const std::string bp = prefix + "block" + std::to_string(k) + ".";
        out.push_back({bp + "weight", &layers_[i].block.layers[k].weight});
        out.push_back({bp + "bias", &layers_[i].block.layers[k].bias});
      }
    }
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
      std::visit([&](const auto& l) { n += layer_param_count(l); }, layer.impl);
      n += layer_param_count(layer.block);
    }
    return n;
  }

  /// Runs the stack. `views` holds one CSR view per layer: the same full
  /// graph view repeated, or per-hop block views. When a block is attached
  /// the layer's activation is the block's own final activation; otherwise
  /// non-final layers apply ReLU and the final layer emits raw logits.
  /// Dropout (train mode only) sits between layers.
  typename Tape<Real>::Tensor forward(Tape<Real>& tape, std::span<const CsrView> views,
                                      typename Tape<Real>::Tensor x, bool train_mode,
                                      RngStream* dropout_rng = nullptr,
                                      ParamBinder<Real>* binder = nullptr) const {
    if (views.size() != layers_.size())
      throw std::invalid_argument("Model::forward: need one view per layer");
    if (x.cols != cfg_.in_dim)
      throw std::invalid_argument("Model::forward: input width != in_dim");
    ParamBinder<Real> local(tape);
    ParamBinder<Real>& p = binder ? *binder : local;
    auto h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const CsrView& view = views[i];
      auto z = std::visit(
          [&](const auto& l) {
            auto ref = bind(p, l);
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, GcnLayer<Real>>)
              return gcn_forward(tape, ref, view, h);
            else if constexpr (std::is_same_v<L, SageLayer<Real>>)
              return sage_forward(tape, ref, view, h);
            else
              return gat_forward(tape, ref, view, h);
          },
          layers_[i].impl);
      const bool final_layer = (i + 1 == layers_.size());
      if (!layers_[i].block.empty()) {
        h = ngnn_forward(tape, bind(p, layers_[i].block), z);
      } else {
        h = final_layer ? z : tape.activation(z, Activation::relu);
      }
      if (!final_layer && train_mode && cfg_.dropout > 0.0) {
        if (!dropout_rng)
          throw std::invalid_argument("Model::forward: dropout requires an rng in train mode");
        h = tape.dropout(h, Real(cfg_.dropout), *dropout_rng);
      }
    }
    return h;
  }

 private:
  ModelConfig cfg_;
  std::vector<GnnLayer<Real>> layers_;
};

/// Builds an initialized model: Xavier-uniform weights, zero biases, NGNN
/// blocks attached per the position policy. Deterministic for a given seed.
template <class Real>
Model<Real> build_model(const ModelConfig& cfg, RngStream rng) {
  cfg.validate();
  std::vector<Activation> block_acts;
  if (cfg.ngnn_position != NgnnPosition::none) block_acts = parse_ngnn_spec(cfg.ngnn_spec);

  const auto attached = cfg.attached_layers();
  std::vector<GnnLayer<Real>> layers(cfg.num_layers);
  // GNN weights and block weights draw from disjoint streams, so models that
  // differ only in the position policy share identical GNN parameters for a
  // given seed (paired comparisons rely on this).
  const RngStream gnn_rng = rng.split("gnn");
  const RngStream block_rng = rng.split("block");
  std::uint64_t gnn_idx = 0, block_idx = 0;
  auto next = [&]() { return gnn_rng.split(gnn_idx++); };
  auto next_block = [&]() { return block_rng.split(block_idx++); };
  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    const std::size_t in = cfg.layer_in(i);
    const std::size_t out = cfg.layer_out(i);
    switch (cfg.arch) {
      case Arch::gcn:
        layers[i].impl = GcnLayer<Real>{detail::xavier_uniform<Real>(in, out, next()),
                                        Matrix<Real>(1, out)};
        break;
      case Arch::sage:
        layers[i].impl = SageLayer<Real>{detail::xavier_uniform<Real>(in, out, next()),
                                         detail::xavier_uniform<Real>(in, out, next()),
                                         Matrix<Real>(1, out)};
        break;
      case Arch::gat: {
        GatLayer<Real> l;
        l.heads = cfg.layer_heads(i);
        if (out % l.heads != 0)
          throw std::invalid_argument("build_model: layer width not divisible by heads");
        const std::size_t f = out / l.heads;
        for (std::size_t h = 0; h < l.heads; ++h) {
          l.w.push_back(detail::xavier_uniform<Real>(in, f, next()));
          l.a_src.push_back(detail::xavier_uniform<Real>(f, 1, next()));
          l.a_dst.push_back(detail::xavier_uniform<Real>(f, 1, next()));
        }
        l.bias = Matrix<Real>(1, out);
        layers[i].impl = std::move(l);
        break;
      }
    }
    if (std::find(attached.begin(), attached.end(), i) != attached.end()) {
      for (Activation act : block_acts)
        layers[i].block.layers.push_back(
            {detail::xavier_uniform<Real>(out, out, next_block()), Matrix<Real>(1, out), act});
    }
  }
  return Model<Real>(cfg, std::move(layers));
}

}  // namespace ngnn
