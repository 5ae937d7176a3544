#pragma once

#include <cstdint>
#include <stdexcept>

#include "ngnn/matrix.hpp"
#include "ngnn/rng.hpp"

namespace ngnn {

enum class PerturbMode { feature_concat, feature_add, edge_add };

/// One active perturbation: Gaussian feature noise (concatenated or added)
/// with std sigma, or random edge injection at ratio `ratio`.
struct PerturbSpec {
  PerturbMode mode = PerturbMode::feature_add;
  double sigma = 0.0;
  double ratio = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (sigma < 0) throw std::invalid_argument("PerturbSpec: sigma must be non-negative");
    if (ratio < 0) throw std::invalid_argument("PerturbSpec: ratio must be non-negative");
  }
};

/// [X | N(0, sigma)]: appends an N x D block of iid Gaussian noise, doubling
/// the feature width. The original columns are preserved bitwise.
template <class Real>
Matrix<Real> perturb_features_concat(const Matrix<Real>& x, double sigma, RngStream& rng) {
  if (sigma < 0) throw std::invalid_argument("perturb_features_concat: sigma must be non-negative");
  const std::size_t n = x.rows(), d = x.cols();
  Matrix<Real> out(n, 2 * d);
  for (std::size_t r = 0; r < n; ++r) {
    const Real* src = x.row(r);
    Real* dst = out.row(r);
    for (std::size_t c = 0; c < d; ++c) dst[c] = src[c];
    // Unit draws scaled by sigma, so sweeps over sigma on the same stream see
    // the same noise directions.
    for (std::size_t c = 0; c < d; ++c)
      dst[d + c] = sigma == 0.0 ? Real(0) : static_cast<Real>(rng.normal() * sigma);
  }
  return out;
}

/// X + N(0, sigma) elementwise.
template <class Real>
Matrix<Real> perturb_features_add(const Matrix<Real>& x, double sigma, RngStream& rng) {
  if (sigma < 0) throw std::invalid_argument("perturb_features_add: sigma must be non-negative");
  if (sigma == 0.0) return x;
  Matrix<Real> out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] += static_cast<Real>(rng.normal() * sigma);
  return out;
}

}  // namespace ngnn
