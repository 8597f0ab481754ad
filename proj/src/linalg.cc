/* Copyright 2026 The oosguard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "oosguard/linalg.h"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "oosguard/error.h"

namespace oosguard {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw DataError("matrix data length " + std::to_string(data_.size()) +
                    " does not match shape " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DataError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DataError("matrix shape mismatch in +=");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

Matrix operator*(double scale, Matrix m) {
  m *= scale;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DataError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DataError("matmul_bt: inner dimensions differ");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = dot(a_row, b.row(j));
    }
  }
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DataError("matmul_at: inner dimensions differ");
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto a_row = a.row(k);
    const auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> v) {
  if (m.cols() != v.size()) throw DataError("matvec: dimension mismatch");
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double trace(const Matrix& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) t += m(i, i);
  return t;
}

double max_asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) throw DataError("max_asymmetry: matrix not square");
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
    }
  }
  return worst;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DataError("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

std::optional<Matrix> cholesky(const Matrix& m) {
  if (m.rows() != m.cols()) throw DataError("cholesky: matrix not square");
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = m(j, j);
    const auto lj = l.row(j).first(j);
    for (double v : lj) diag -= v * v;
    if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      const double s = m(i, j) - dot(l.row(i).first(j), lj);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Matrix inverse_from_cholesky(const Matrix& lower) {
  const std::size_t n = lower.rows();
  // Forward substitution for W = L^{-1}, lower triangular.
  Matrix w(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    w(col, col) = 1.0 / lower(col, col);
    for (std::size_t i = col + 1; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = col; k < i; ++k) s += lower(i, k) * w(k, col);
      w(i, col) = -s / lower(i, i);
    }
  }
  // (L L^T)^{-1} = W^T W; fill the upper triangle and mirror.
  Matrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k < n; ++k) s += w(k, i) * w(k, j);
      inv(i, j) = s;
      inv(j, i) = s;
    }
  }
  return inv;
}

}  // namespace oosguard
