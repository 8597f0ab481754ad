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

#ifndef OOSGUARD_LINALG_H_
#define OOSGUARD_LINALG_H_

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace oosguard {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double scale);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(double scale, Matrix m);

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// m * v
std::vector<double> matvec(const Matrix& m, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double trace(const Matrix& m);

// max |m(i,j) - m(j,i)|
double max_asymmetry(const Matrix& m);
// max |a(i,j) - b(i,j)|; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);

// Lower-triangular L with L L^T = m, or nullopt when m is not numerically
// positive definite. Only the lower triangle of m is read.
std::optional<Matrix> cholesky(const Matrix& m);

// Inverse of L L^T given the lower Cholesky factor L. Result is exactly
// symmetric.
Matrix inverse_from_cholesky(const Matrix& lower);

}  // namespace oosguard

#endif  // OOSGUARD_LINALG_H_
