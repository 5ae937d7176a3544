#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ngnn/matrix.hpp"
#include "ngnn/tape.hpp"

namespace ngnn {

/// Central-difference gradient check. `build` receives a fresh tape plus leaf
/// tensors bound to `inputs` (all requiring grad) and must return a scalar.
/// The analytic gradient comes from one backward pass; the numeric one from
/// forward evaluations only, so the two paths are independent. Returns the
/// max relative error over every coordinate of every input.
template <class Real, class BuildFn>
Real finite_diff_check(BuildFn&& build, std::vector<Matrix<Real>> inputs, Real h) {
  if (h <= Real(0)) throw std::invalid_argument("finite_diff_check: h must be positive");

  auto eval = [&](const std::vector<Matrix<Real>>& points) {
    Tape<Real> tape;
    std::vector<typename Tape<Real>::Tensor> leaves;
    leaves.reserve(points.size());
    for (const Matrix<Real>& m : points) leaves.push_back(tape.input(m, true));
    auto loss = build(tape, leaves);
    if (loss.rows != 1 || loss.cols != 1)
      throw std::invalid_argument("finite_diff_check: function must be scalar-valued");
    return tape.value(loss)(0, 0);
  };

  // Analytic gradients.
  std::vector<Matrix<Real>> analytic;
  {
    Tape<Real> tape;
    std::vector<typename Tape<Real>::Tensor> leaves;
    for (const Matrix<Real>& m : inputs) leaves.push_back(tape.input(m, true));
    auto loss = build(tape, leaves);
    if (loss.rows != 1 || loss.cols != 1)
      throw std::invalid_argument("finite_diff_check: function must be scalar-valued");
    tape.backward(loss);
    for (auto leaf : leaves) analytic.push_back(tape.grad(leaf));
  }

  Real worst = Real(0);
  std::vector<Matrix<Real>> point = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const Real orig = point[k].data()[i];
      point[k].data()[i] = orig + h;
      const Real fp = eval(point);
      point[k].data()[i] = orig - h;
      const Real fm = eval(point);
      point[k].data()[i] = orig;
      const Real numeric = (fp - fm) / (Real(2) * h);
      const Real exact = analytic[k].data()[i];
      const Real denom = std::max(std::max(std::abs(numeric), std::abs(exact)), Real(1e-8));
      worst = std::max(worst, std::abs(numeric - exact) / denom);
    }
  }
  return worst;
}

}  // namespace ngnn
