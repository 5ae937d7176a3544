#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ngnn/matrix.hpp"
#include "ngnn/rng.hpp"

namespace ngnn {

enum class Activation { identity, relu, sigmoid, leaky_relu };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::leaky_relu: return "leaky_relu";
  }
  return "?";
}

/// Negative slope used by the attention score nonlinearity.
inline constexpr double kLeakyReluSlope = 0.2;

/// Non-owning CSR view: edges grouped by destination, `indices` addressing
/// rows of the source-side feature matrix. A full graph is the special case
/// num_src == num_dst == N with indices holding node ids. The referenced
/// arrays must outlive any Tape op they are passed to.
struct CsrView {
  std::span<const std::uint32_t> offsets;  // size num_dst + 1
  std::span<const std::uint32_t> indices;  // source row per edge
  std::span<const double> coeff;           // optional per-edge weight
  std::span<const double> self_coeff;      // optional per-destination self weight
  std::size_t num_src = 0;
  std::size_t num_dst = 0;

  std::size_t num_edges() const { return indices.size(); }
  bool has_coeff() const { return !coeff.empty(); }
  bool has_self_coeff() const { return !self_coeff.empty(); }
};

/// Owned CSR buffers, for structures built on the fly (self-loop augmented
/// attention graphs, sampled hops).
struct Csr {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> indices;
  std::vector<double> coeff;
  std::vector<double> self_coeff;
  std::size_t num_src = 0;
  std::size_t num_dst = 0;

  CsrView view() const {
    return CsrView{offsets, indices, coeff, self_coeff, num_src, num_dst};
  }
};

/// Reverse-mode autodiff tape over dense 2-D tensors. Every op appends one
/// node, so creation order is a topological order and backward() walks the
/// list once in reverse. Tensors are cheap handles into the tape; a tape is
/// confined to one training step on one thread.
template <class Real>
class Tape {
 public:
  struct Tensor {
    std::size_t id = static_cast<std::size_t>(-1);
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool defined() const { return id != static_cast<std::size_t>(-1); }
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf tensor. Parameters and inputs enter here.
  Tensor input(Matrix<Real> value, bool requires_grad = false) {
    return push(std::move(value), requires_grad, nullptr);
  }

  std::size_t num_nodes() const { return nodes_.size(); }

  const Matrix<Real>& value(Tensor t) const { return node(t).value; }

  bool requires_grad(Tensor t) const { return node(t).requires_grad; }

  /// Gradient of the last backward() pass. Zeros when the tensor never
  /// received a contribution (e.g. an unused parameter).
  const Matrix<Real>& grad(Tensor t) const {
    const NodeRec& n = node(t);
    if (!n.requires_grad) throw std::invalid_argument("grad: tensor does not require grad");
    return n.grad;
  }

  /// Keeps a CSR alive for the tape's lifetime (backward needs the structure).
  CsrView own(Csr csr) {
    owned_csr_.push_back(std::make_unique<Csr>(std::move(csr)));
    return owned_csr_.back()->view();
  }

  // ---- elementwise / dense ops ----

  Tensor matmul(Tensor a, Tensor b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix<Real> out(a.rows, b.cols);
    detail::gemm_acc(value(a), value(b), out);
    return push(std::move(out), wants(a) || wants(b),
                [aid = a.id, bid = b.id](Tape& t, const NodeRec& self) {
                  if (t.wants_id(aid)) detail::gemm_nt_acc(self.grad, t.val(bid), t.grad_mut(aid));
                  if (t.wants_id(bid)) detail::gemm_tn_acc(t.val(aid), self.grad, t.grad_mut(bid));
                });
  }

  Tensor add(Tensor a, Tensor b) {
    if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("add: shape mismatch");
    Matrix<Real> out = value(a);
    const Matrix<Real>& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += vb.data()[i];
    return push(std::move(out), wants(a) || wants(b),
                [aid = a.id, bid = b.id](Tape& t, const NodeRec& self) {
                  t.accumulate(aid, self.grad);
                  t.accumulate(bid, self.grad);
                });
  }

  /// Elementwise product (same shapes).
  Tensor mul(Tensor a, Tensor b) {
    if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("mul: shape mismatch");
    Matrix<Real> out = value(a);
    const Matrix<Real>& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= vb.data()[i];
    return push(std::move(out), wants(a) || wants(b),
                [aid = a.id, bid = b.id](Tape& t, const NodeRec& self) {
                  if (t.wants_id(aid)) {
                    Matrix<Real>& ga = t.grad_mut(aid);
                    const Matrix<Real>& vb2 = t.val(bid);
                    for (std::size_t i = 0; i < ga.size(); ++i)
                      ga.data()[i] += self.grad.data()[i] * vb2.data()[i];
                  }
                  if (t.wants_id(bid)) {
                    Matrix<Real>& gb = t.grad_mut(bid);
                    const Matrix<Real>& va = t.val(aid);
                    for (std::size_t i = 0; i < gb.size(); ++i)
                      gb.data()[i] += self.grad.data()[i] * va.data()[i];
                  }
                });
  }

  Tensor scale(Tensor x, Real s) {
    Matrix<Real> out = value(x);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
    return push(std::move(out), wants(x), [xid = x.id, s](Tape& t, const NodeRec& self) {
      if (!t.wants_id(xid)) return;
      Matrix<Real>& gx = t.grad_mut(xid);
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += s * self.grad.data()[i];
    });
  }

  /// Row-broadcast bias add: x[m×n] + b[1×n].
  Tensor add_bias(Tensor x, Tensor b) {
    if (b.rows != 1 || b.cols != x.cols) throw std::invalid_argument("add_bias: bias must be 1 x cols(x)");
    Matrix<Real> out = value(x);
    const Matrix<Real>& vb = value(b);
    for (std::size_t r = 0; r < out.rows(); ++r) {
      Real* orow = out.row(r);
      for (std::size_t c = 0; c < out.cols(); ++c) orow[c] += vb(0, c);
    }
    return push(std::move(out), wants(x) || wants(b),
                [xid = x.id, bid = b.id](Tape& t, const NodeRec& self) {
                  t.accumulate(xid, self.grad);
                  if (t.wants_id(bid)) {
                    Matrix<Real>& gb = t.grad_mut(bid);
                    for (std::size_t r = 0; r < self.grad.rows(); ++r) {
                      const Real* grow = self.grad.row(r);
                      for (std::size_t c = 0; c < self.grad.cols(); ++c) gb(0, c) += grow[c];
                    }
                  }
                });
  }

  Tensor activation(Tensor x, Activation kind) {
    if (kind == Activation::identity) {
      Matrix<Real> out = value(x);
      return push(std::move(out), wants(x), [xid = x.id](Tape& t, const NodeRec& self) {
        t.accumulate(xid, self.grad);
      });
    }
    Matrix<Real> out = value(x);
    switch (kind) {
      case Activation::relu:
        for (std::size_t i = 0; i < out.size(); ++i)
          if (out.data()[i] < Real(0)) out.data()[i] = Real(0);
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = stable_sigmoid(out.data()[i]);
        break;
      case Activation::leaky_relu:
        for (std::size_t i = 0; i < out.size(); ++i)
          if (out.data()[i] < Real(0)) out.data()[i] *= Real(kLeakyReluSlope);
        break;
      default: break;
    }
    return push(std::move(out), wants(x), [xid = x.id, kind](Tape& t, const NodeRec& self) {
      if (!t.wants_id(xid)) return;
      Matrix<Real>& gx = t.grad_mut(xid);
      const Matrix<Real>& in = t.val(xid);
      const Matrix<Real>& y = self.value;
      for (std::size_t i = 0; i < gx.size(); ++i) {
        Real d;
        switch (kind) {
          case Activation::relu: d = in.data()[i] > Real(0) ? Real(1) : Real(0); break;
          case Activation::sigmoid: d = y.data()[i] * (Real(1) - y.data()[i]); break;
          case Activation::leaky_relu:
            d = in.data()[i] > Real(0) ? Real(1) : Real(kLeakyReluSlope);
            break;
          default: d = Real(1); break;
        }
        gx.data()[i] += d * self.grad.data()[i];
      }
    });
  }

  /// Columnwise concatenation; all inputs must share the row count.
  Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    std::size_t cols = 0;
    for (const Tensor& p : parts) {
      if (p.rows != parts[0].rows) throw std::invalid_argument("concat_cols: row mismatch");
      cols += p.cols;
    }
    Matrix<Real> out(parts[0].rows, cols);
    std::vector<std::size_t> ids;
    std::vector<std::size_t> widths;
    std::size_t at = 0;
    for (const Tensor& p : parts) {
      const Matrix<Real>& v = value(p);
      for (std::size_t r = 0; r < v.rows(); ++r)
        std::copy(v.row(r), v.row(r) + v.cols(), out.row(r) + at);
      at += p.cols;
      ids.push_back(p.id);
      widths.push_back(p.cols);
    }
    bool rg = false;
    for (const Tensor& p : parts) rg = rg || wants(p);
    return push(std::move(out), rg,
                [ids, widths](Tape& t, const NodeRec& self) {
                  std::size_t at2 = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (t.wants_id(ids[k])) {
                      Matrix<Real>& g = t.grad_mut(ids[k]);
                      for (std::size_t r = 0; r < g.rows(); ++r) {
                        const Real* src = self.grad.row(r) + at2;
                        Real* dst = g.row(r);
                        for (std::size_t c = 0; c < widths[k]; ++c) dst[c] += src[c];
                      }
                    }
                    at2 += widths[k];
                  }
                });
  }

  /// First n rows. Returns x unchanged when n == rows(x).
  Tensor slice_rows(Tensor x, std::size_t n) {
    if (n > x.rows) throw std::invalid_argument("slice_rows: n exceeds rows");
    if (n == x.rows) return x;
    const Matrix<Real>& v = value(x);
    Matrix<Real> out(n, x.cols);
    std::copy(v.data(), v.data() + n * x.cols, out.data());
    return push(std::move(out), wants(x), [xid = x.id](Tape& t, const NodeRec& self) {
      if (!t.wants_id(xid)) return;
      Matrix<Real>& gx = t.grad_mut(xid);
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx.data()[i] += self.grad.data()[i];
    });
  }

  /// Row gather: out[i] = x[ids[i]]. ids are copied into the node.
  Tensor gather_rows(Tensor x, std::span<const std::uint32_t> ids) {
    for (std::uint32_t id : ids)
      if (id >= x.rows) throw std::invalid_argument("gather_rows: row id out of range");
    const Matrix<Real>& v = value(x);
    Matrix<Real> out(ids.size(), x.cols);
    for (std::size_t i = 0; i < ids.size(); ++i)
      std::copy(v.row(ids[i]), v.row(ids[i]) + v.cols(), out.row(i));
    return push(std::move(out), wants(x),
                [xid = x.id, idv = std::vector<std::uint32_t>(ids.begin(), ids.end())](
                    Tape& t, const NodeRec& self) {
                  if (!t.wants_id(xid)) return;
                  Matrix<Real>& gx = t.grad_mut(xid);
                  for (std::size_t i = 0; i < idv.size(); ++i) {
                    const Real* src = self.grad.row(i);
                    Real* dst = gx.row(idv[i]);
                    for (std::size_t c = 0; c < gx.cols(); ++c) dst[c] += src[c];
                  }
                });
  }

  /// Inverted dropout: keep with prob 1-p and scale kept units by 1/(1-p).
  Tensor dropout(Tensor x, Real p, RngStream& rng) {
    if (p < Real(0) || p >= Real(1)) throw std::invalid_argument("dropout: p must be in [0,1)");
    if (p == Real(0)) return x;
    auto mask = std::make_shared<Matrix<Real>>(x.rows, x.cols);
    const Real keep = Real(1) - p;
    Matrix<Real> out = value(x);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Real m = rng.uniform() < p ? Real(0) : Real(1) / keep;
      mask->data()[i] = m;
      out.data()[i] *= m;
    }
    return push(std::move(out), wants(x), [xid = x.id, mask](Tape& t, const NodeRec& self) {
      if (!t.wants_id(xid)) return;
      Matrix<Real>& gx = t.grad_mut(xid);
      for (std::size_t i = 0; i < gx.size(); ++i)
        gx.data()[i] += self.grad.data()[i] * mask->data()[i];
    });
  }

  /// Sum of all entries, as a 1x1 scalar.
  Tensor sum(Tensor x) {
    const Matrix<Real>& v = value(x);
    Real acc = Real(0);
    for (std::size_t i = 0; i < v.size(); ++i) acc += v.data()[i];
    Matrix<Real> out(1, 1);
    out(0, 0) = acc;
    return push(std::move(out), wants(x), [xid = x.id](Tape& t, const NodeRec& self) {
      if (!t.wants_id(xid)) return;
      Matrix<Real>& gx = t.grad_mut(xid);
      const Real g = self.grad(0, 0);
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g;
    });
  }

  // ---- sparse / graph ops ----

  /// out[v] = sum_e coeff_e * x[src_e] (+ self_coeff[v] * x[v] when present).
  /// Plain neighbor sum when the view carries no coefficients.
  Tensor spmm(const CsrView& view, Tensor x) {
    check_view(view, x, "spmm");
    const Matrix<Real>& v = value(x);
    Matrix<Real> out(view.num_dst, x.cols);
    for (std::size_t d = 0; d < view.num_dst; ++d) {
      Real* orow = out.row(d);
      for (std::uint32_t e = view.offsets[d]; e < view.offsets[d + 1]; ++e) {
        const Real c = view.has_coeff() ? Real(view.coeff[e]) : Real(1);
        const Real* srow = v.row(view.indices[e]);
        for (std::size_t j = 0; j < out.cols(); ++j) orow[j] += c * srow[j];
      }
      if (view.has_self_coeff()) {
        const Real c = Real(view.self_coeff[d]);
        const Real* srow = v.row(d);
        for (std::size_t j = 0; j < out.cols(); ++j) orow[j] += c * srow[j];
      }
    }
    return push(std::move(out), wants(x), [view, xid = x.id](Tape& t, const NodeRec& self) {
      if (!t.wants_id(xid)) return;
      Matrix<Real>& gx = t.grad_mut(xid);
      for (std::size_t d = 0; d < view.num_dst; ++d) {
        const Real* grow = self.grad.row(d);
        for (std::uint32_t e = view.offsets[d]; e < view.offsets[d + 1]; ++e) {
          const Real c = view.has_coeff() ? Real(view.coeff[e]) : Real(1);
          Real* dst = gx.row(view.indices[e]);
          for (std::size_t j = 0; j < gx.cols(); ++j) dst[j] += c * grow[j];
        }
        if (view.has_self_coeff()) {
          const Real c = Real(view.self_coeff[d]);
          Real* dst = gx.row(d);
          for (std::size_t j = 0; j < gx.cols(); ++j) dst[j] += c * grow[j];
        }
      }
    });
  }

  /// out[v] = mean over listed neighbors of x, zero for empty neighborhoods.
  Tensor neighbor_mean(const CsrView& view, Tensor x) {
    check_view(view, x, "neighbor_mean");
    const Matrix<Real>& v = value(x);
    Matrix<Real> out(view.num_dst, x.cols);
    for (std::size_t d = 0; d < view.num_dst; ++d) {
      const std::uint32_t lo = view.offsets[d], hi = view.offsets[d + 1];
      if (lo == hi) continue;
      Real* orow = out.row(d);
      for (std::uint32_t e = lo; e < hi; ++e) {
        const Real* srow = v.row(view.indices[e]);
        for (std::size_t j = 0; j < out.cols(); ++j) orow[j] += srow[j];
      }
      const Real inv = Real(1) / Real(hi - lo);
      for (std::size_t j = 0; j < out.cols(); ++j) orow[j] *= inv;
    }
    return push(std::move(out), wants(x), [view, xid = x.id](Tape& t, const NodeRec& self) {
      if (!t.wants_id(xid)) return;
      Matrix<Real>& gx = t.grad_mut(xid);
      for (std::size_t d = 0; d < view.num_dst; ++d) {
        const std::uint32_t lo = view.offsets[d], hi = view.offsets[d + 1];
        if (lo == hi) continue;
        const Real inv = Real(1) / Real(hi - lo);
        const Real* grow = self.grad.row(d);
        for (std::uint32_t e = lo; e < hi; ++e) {
          Real* dst = gx.row(view.indices[e]);
          for (std::size_t j = 0; j < gx.cols(); ++j) dst[j] += inv * grow[j];
        }
      }
    });
  }

  /// Per-edge score e_i = s_src[src_i] + s_dst[dst_i]; both inputs are column
  /// vectors sized num_src / num_dst.
  Tensor edge_score_sum(const CsrView& view, Tensor s_src, Tensor s_dst) {
    if (s_src.cols != 1 || s_dst.cols != 1)
      throw std::invalid_argument("edge_score_sum: scores must be column vectors");
    if (s_src.rows != view.num_src || s_dst.rows != view.num_dst)
      throw std::invalid_argument("edge_score_sum: score length mismatch");
    const Matrix<Real>& vs = value(s_src);
    const Matrix<Real>& vd = value(s_dst);
    Matrix<Real> out(view.num_edges(), 1);
    for (std::size_t d = 0; d < view.num_dst; ++d)
      for (std::uint32_t e = view.offsets[d]; e < view.offsets[d + 1]; ++e)
        out(e, 0) = vs(view.indices[e], 0) + vd(d, 0);
    return push(std::move(out), wants(s_src) || wants(s_dst),
                [view, sid = s_src.id, did = s_dst.id](Tape& t, const NodeRec& self) {
                  for (std::size_t d = 0; d < view.num_dst; ++d)
                    for (std::uint32_t e = view.offsets[d]; e < view.offsets[d + 1]; ++e) {
                      const Real g = self.grad(e, 0);
                      if (t.wants_id(sid)) t.grad_mut(sid)(view.indices[e], 0) += g;
                      if (t.wants_id(did)) t.grad_mut(did)(d, 0) += g;
                    }
                });
  }

  /// Softmax over each destination's edge segment (numerically stable).
  Tensor edge_softmax(const CsrView& view, Tensor e) {
    if (e.cols != 1 || e.rows != view.num_edges())
      throw std::invalid_argument("edge_softmax: expected one score per edge");
    const Matrix<Real>& v = value(e);
    Matrix<Real> out(e.rows, 1);
    for (std::size_t d = 0; d < view.num_dst; ++d) {
      const std::uint32_t lo = view.offsets[d], hi = view.offsets[d + 1];
      if (lo == hi) continue;
      Real mx = v(lo, 0);
      for (std::uint32_t i = lo + 1; i < hi; ++i) mx = std::max(mx, v(i, 0));
      Real denom = Real(0);
      for (std::uint32_t i = lo; i < hi; ++i) {
        out(i, 0) = std::exp(v(i, 0) - mx);
        denom += out(i, 0);
      }
      for (std::uint32_t i = lo; i < hi; ++i) out(i, 0) /= denom;
    }
    return push(std::move(out), wants(e), [view, eid = e.id](Tape& t, const NodeRec& self) {
      if (!t.wants_id(eid)) return;
      Matrix<Real>& ge = t.grad_mut(eid);
      const Matrix<Real>& a = self.value;
      for (std::size_t d = 0; d < view.num_dst; ++d) {
        const std::uint32_t lo = view.offsets[d], hi = view.offsets[d + 1];
        Real dot = Real(0);
        for (std::uint32_t i = lo; i < hi; ++i) dot += a(i, 0) * self.grad(i, 0);
        for (std::uint32_t i = lo; i < hi; ++i) ge(i, 0) += a(i, 0) * (self.grad(i, 0) - dot);
      }
    });
  }

  /// out[v] = sum over v's edges of alpha_e * z[src_e].
  Tensor edge_weighted_sum(const CsrView& view, Tensor alpha, Tensor z) {
    if (alpha.cols != 1 || alpha.rows != view.num_edges())
      throw std::invalid_argument("edge_weighted_sum: expected one weight per edge");
    if (z.rows != view.num_src) throw std::invalid_argument("edge_weighted_sum: z rows mismatch");
    const Matrix<Real>& va = value(alpha);
    const Matrix<Real>& vz = value(z);
    Matrix<Real> out(view.num_dst, z.cols);
    for (std::size_t d = 0; d < view.num_dst; ++d) {
      Real* orow = out.row(d);
      for (std::uint32_t e = view.offsets[d]; e < view.offsets[d + 1]; ++e) {
        const Real a = va(e, 0);
        const Real* srow = vz.row(view.indices[e]);
        for (std::size_t j = 0; j < out.cols(); ++j) orow[j] += a * srow[j];
      }
    }
    return push(std::move(out), wants(alpha) || wants(z),
                [view, aid = alpha.id, zid = z.id](Tape& t, const NodeRec& self) {
                  const Matrix<Real>& va2 = t.val(aid);
                  const Matrix<Real>& vz2 = t.val(zid);
                  for (std::size_t d = 0; d < view.num_dst; ++d) {
                    const Real* grow = self.grad.row(d);
                    for (std::uint32_t e = view.offsets[d]; e < view.offsets[d + 1]; ++e) {
                      const std::uint32_t s = view.indices[e];
                      if (t.wants_id(aid)) {
                        Real acc = Real(0);
                        const Real* zrow = vz2.row(s);
                        for (std::size_t j = 0; j < vz2.cols(); ++j) acc += grow[j] * zrow[j];
                        t.grad_mut(aid)(e, 0) += acc;
                      }
                      if (t.wants_id(zid)) {
                        Real* dst = t.grad_mut(zid).row(s);
                        const Real a = va2(e, 0);
                        for (std::size_t j = 0; j < vz2.cols(); ++j) dst[j] += a * grow[j];
                      }
                    }
                  }
                });
  }

  /// Pairwise endpoint dot products: score_i = h[src_i] . h[dst_i].
  Tensor edge_dot(Tensor h, std::span<const std::uint32_t> src, std::span<const std::uint32_t> dst) {
    if (src.size() != dst.size()) throw std::invalid_argument("edge_dot: endpoint list mismatch");
    for (std::size_t i = 0; i < src.size(); ++i)
      if (src[i] >= h.rows || dst[i] >= h.rows)
        throw std::invalid_argument("edge_dot: endpoint out of range");
    const Matrix<Real>& v = value(h);
    Matrix<Real> out(src.size(), 1);
    for (std::size_t i = 0; i < src.size(); ++i) {
      const Real* a = v.row(src[i]);
      const Real* b = v.row(dst[i]);
      Real acc = Real(0);
      for (std::size_t j = 0; j < v.cols(); ++j) acc += a[j] * b[j];
      out(i, 0) = acc;
    }
    return push(std::move(out), wants(h),
                [hid = h.id, s = std::vector<std::uint32_t>(src.begin(), src.end()),
                 d = std::vector<std::uint32_t>(dst.begin(), dst.end())](Tape& t,
                                                                         const NodeRec& self) {
                  if (!t.wants_id(hid)) return;
                  Matrix<Real>& gh = t.grad_mut(hid);
                  const Matrix<Real>& vh = t.val(hid);
                  for (std::size_t i = 0; i < s.size(); ++i) {
                    const Real g = self.grad(i, 0);
                    Real* gs = gh.row(s[i]);
                    Real* gd = gh.row(d[i]);
                    const Real* vs = vh.row(s[i]);
                    const Real* vd = vh.row(d[i]);
                    for (std::size_t j = 0; j < gh.cols(); ++j) {
                      gs[j] += g * vd[j];
                      gd[j] += g * vs[j];
                    }
                  }
                });
  }

  // ---- losses ----

  /// Mean over rows of -log softmax(logits)[label]. Stable log-sum-exp.
  Tensor softmax_cross_entropy(Tensor logits, std::span<const std::int32_t> labels) {
    if (labels.size() != logits.rows)
      throw std::invalid_argument("softmax_cross_entropy: one label per row required");
    if (logits.rows == 0) throw std::invalid_argument("softmax_cross_entropy: empty input");
    for (std::int32_t l : labels)
      if (l < 0 || static_cast<std::size_t>(l) >= logits.cols)
        throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const Matrix<Real>& v = value(logits);
    auto soft = std::make_shared<Matrix<Real>>(v.rows(), v.cols());
    Real loss = Real(0);
    for (std::size_t r = 0; r < v.rows(); ++r) {
      const Real* row = v.row(r);
      Real mx = row[0];
      for (std::size_t c = 1; c < v.cols(); ++c) mx = std::max(mx, row[c]);
      Real denom = Real(0);
      for (std::size_t c = 0; c < v.cols(); ++c) {
        const Real e = std::exp(row[c] - mx);
        (*soft)(r, c) = e;
        denom += e;
      }
      for (std::size_t c = 0; c < v.cols(); ++c) (*soft)(r, c) /= denom;
      loss += (mx - row[labels[r]]) + std::log(denom);
    }
    Matrix<Real> out(1, 1);
    out(0, 0) = loss / Real(v.rows());
    return push(std::move(out), wants(logits),
                [lid = logits.id, soft,
                 lv = std::vector<std::int32_t>(labels.begin(), labels.end())](
                    Tape& t, const NodeRec& self) {
                  if (!t.wants_id(lid)) return;
                  Matrix<Real>& g = t.grad_mut(lid);
                  const Real scale = self.grad(0, 0) / Real(g.rows());
                  for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) {
                      Real p = (*soft)(r, c);
                      if (static_cast<std::size_t>(lv[r]) == c) p -= Real(1);
                      g(r, c) += scale * p;
                    }
                });
  }

  /// Mean of the softplus-form binary cross entropy over an m x 1 score
  /// column: softplus(s) - t*s.
  Tensor bce_with_logits(Tensor scores, std::span<const std::int32_t> targets) {
    if (scores.cols != 1) throw std::invalid_argument("bce_with_logits: scores must be m x 1");
    if (targets.size() != scores.rows)
      throw std::invalid_argument("bce_with_logits: one target per score required");
    if (scores.rows == 0) throw std::invalid_argument("bce_with_logits: empty input");
    for (std::int32_t t : targets)
      if (t != 0 && t != 1) throw std::invalid_argument("bce_with_logits: targets must be 0/1");
    const Matrix<Real>& v = value(scores);
    auto sig = std::make_shared<Matrix<Real>>(v.rows(), 1);
    Real loss = Real(0);
    for (std::size_t r = 0; r < v.rows(); ++r) {
      const Real s = v(r, 0);
      (*sig)(r, 0) = stable_sigmoid(s);
      loss += stable_softplus(s) - Real(targets[r]) * s;
    }
    Matrix<Real> out(1, 1);
    out(0, 0) = loss / Real(v.rows());
    return push(std::move(out), wants(scores),
                [sid = scores.id, sig,
                 tv = std::vector<std::int32_t>(targets.begin(), targets.end())](
                    Tape& t, const NodeRec& self) {
                  if (!t.wants_id(sid)) return;
                  Matrix<Real>& g = t.grad_mut(sid);
                  const Real scale = self.grad(0, 0) / Real(g.rows());
                  for (std::size_t r = 0; r < g.rows(); ++r)
                    g(r, 0) += scale * ((*sig)(r, 0) - Real(tv[r]));
                });
  }

  /// Reverse sweep from a scalar loss. Each node is visited exactly once, in
  /// reverse creation (= reverse topological) order. Gradients accumulate
  /// additively into every requires-grad tensor reachable from the loss.
  void backward(Tensor loss) {
    NodeRec& ln = node(loss);
    if (loss.rows != 1 || loss.cols != 1)
      throw std::invalid_argument("backward: loss must be a 1x1 scalar");
    if (!ln.requires_grad) return;
    ln.grad(0, 0) += Real(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      NodeRec& n = nodes_[i];
      if (n.requires_grad && n.backward_fn) n.backward_fn(*this, n);
    }
  }

 private:
  struct NodeRec {
    Matrix<Real> value;
    Matrix<Real> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::function<void(Tape&, const NodeRec&)> backward_fn;
  };

  Tensor push(Matrix<Real> value, bool requires_grad,
              std::function<void(Tape&, const NodeRec&)> fn) {
    NodeRec rec;
    rec.requires_grad = requires_grad;
    if (requires_grad) rec.grad = Matrix<Real>(value.rows(), value.cols());
    rec.value = std::move(value);
    rec.backward_fn = std::move(fn);
    nodes_.push_back(std::move(rec));
    const NodeRec& stored = nodes_.back();
    return Tensor{nodes_.size() - 1, stored.value.rows(), stored.value.cols()};
  }

  const NodeRec& node(Tensor t) const {
    if (!t.defined() || t.id >= nodes_.size())
      throw std::invalid_argument("tape: tensor handle does not belong to this tape");
    return nodes_[t.id];
  }
  NodeRec& node(Tensor t) {
    if (!t.defined() || t.id >= nodes_.size())
      throw std::invalid_argument("tape: tensor handle does not belong to this tape");
    return nodes_[t.id];
  }

  bool wants(Tensor t) const { return node(t).requires_grad; }
  bool wants_id(std::size_t id) const { return nodes_[id].requires_grad; }
  const Matrix<Real>& val(std::size_t id) const { return nodes_[id].value; }
  Matrix<Real>& grad_mut(std::size_t id) { return nodes_[id].grad; }

  void accumulate(std::size_t id, const Matrix<Real>& g) {
    if (!wants_id(id)) return;
    Matrix<Real>& dst = nodes_[id].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += g.data()[i];
  }

  void check_view(const CsrView& view, Tensor x, const char* what) const {
    if (view.offsets.size() != view.num_dst + 1)
      throw std::invalid_argument(std::string(what) + ": malformed CSR offsets");
    if (x.rows != view.num_src)
      throw std::invalid_argument(std::string(what) + ": feature rows != num_src");
  }

  static Real stable_sigmoid(Real x) {
    if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
    const Real e = std::exp(x);
    return e / (Real(1) + e);
  }

  static Real stable_softplus(Real x) {
    if (x > Real(0)) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
  }

  std::vector<NodeRec> nodes_;
  std::vector<std::unique_ptr<Csr>> owned_csr_;
};

}  // namespace ngnn
