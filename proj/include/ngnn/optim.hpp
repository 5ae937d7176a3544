#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ngnn/matrix.hpp"

namespace ngnn {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// SGD / bias-corrected Adam over an ordered parameter list. Moment buffers
/// are keyed by position, so the same parameter order must be passed to every
/// step() call.
template <class Real>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    if (cfg.lr <= 0) throw std::invalid_argument("optimizer: lr must be positive");
  }

  const OptimizerConfig& config() const { return cfg_; }
  std::size_t step_count() const { return step_; }

  void step(const std::vector<Matrix<Real>*>& params, const std::vector<Matrix<Real>>& grads) {
    if (params.size() != grads.size())
      throw std::invalid_argument("optimizer: params/grads count mismatch");
    if (cfg_.kind == OptimizerKind::adam && m_.empty()) {
      m_.reserve(params.size());
      v_.reserve(params.size());
      for (const Matrix<Real>* p : params) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
      }
    }
    if (cfg_.kind == OptimizerKind::adam && m_.size() != params.size())
      throw std::invalid_argument("optimizer: parameter list changed between steps");
    ++step_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix<Real>& p = *params[i];
      const Matrix<Real>& g = grads[i];
      if (!p.same_shape(g)) throw std::invalid_argument("optimizer: grad shape mismatch");
      if (cfg_.kind == OptimizerKind::sgd) {
        const Real lr = Real(cfg_.lr);
        for (std::size_t j = 0; j < p.size(); ++j) p.data()[j] -= lr * g.data()[j];
        continue;
      }
      Matrix<Real>& m = m_[i];
      Matrix<Real>& v = v_[i];
      const Real b1 = Real(cfg_.beta1), b2 = Real(cfg_.beta2);
      const Real corr1 = Real(1) - std::pow(b1, Real(step_));
      const Real corr2 = Real(1) - std::pow(b2, Real(step_));
      const Real lr = Real(cfg_.lr);
      const Real eps = Real(cfg_.eps);
      for (std::size_t j = 0; j < p.size(); ++j) {
        const Real gj = g.data()[j];
        m.data()[j] = b1 * m.data()[j] + (Real(1) - b1) * gj;
        v.data()[j] = b2 * v.data()[j] + (Real(1) - b2) * gj * gj;
        const Real mhat = m.data()[j] / corr1;
        const Real vhat = v.data()[j] / corr2;
        p.data()[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  std::size_t step_ = 0;
  std::vector<Matrix<Real>> m_;
  std::vector<Matrix<Real>> v_;
};

}  // namespace ngnn
