#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace ngnn {

/// Dense row-major 2-D array. Plain storage with no gradient bookkeeping;
/// the Tape wraps these into differentiable tensors.
template <class Real>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real fill = Real(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = Real(1);
    return m;
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
      if (row.size() != m.cols_) throw std::invalid_argument("Matrix::from_rows: ragged rows");
      std::copy(row.begin(), row.end(), m.row(r++));
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  Real* row(std::size_t r) { return data_.data() + r * cols_; }
  const Real* row(std::size_t r) const { return data_.data() + r * cols_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (Real v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <class Other>
  Matrix<Other> cast() const {
    Matrix<Other> m(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) m.data()[i] = static_cast<Other>(data_[i]);
    return m;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

template <class Real>
Real max_abs_diff(const Matrix<Real>& a, const Matrix<Real>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  Real worst = Real(0);
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

namespace detail {

// C += A * B
template <class Real>
void gemm_acc(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c.row(i);
    const Real* arow = a.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = arow[p];
      if (aip == Real(0)) continue;
      const Real* brow = b.row(p);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C += A * B^T
template <class Real>
void gemm_nt_acc(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c) {
  const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* arow = a.row(i);
    Real* crow = c.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const Real* brow = b.row(p);
      Real acc = Real(0);
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C += A^T * B
template <class Real>
void gemm_tn_acc(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* arow = a.row(i);
    const Real* brow = b.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = arow[p];
      if (aip == Real(0)) continue;
      Real* crow = c.row(p);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace detail

}  // namespace ngnn
