// Copyright 2026 The safety_layer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small dense linear algebra used by the kinematics and the safety filter.
// Matrices are row-major and sized at runtime; typical sizes are below 32x32,
// so everything lives in a single contiguous std::vector.

#ifndef SAFETY_LAYER_LINALG_HPP_
#define SAFETY_LAYER_LINALG_HPP_

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace safety_layer {

using Vector = std::vector<double>;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  // Row-wise initializer: Matrix{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<const double> values() const noexcept { return data_; }

  Matrix transpose() const;
  // Largest absolute entry; 0 for empty matrices.
  double max_abs() const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);

double max_abs(std::span<const double> v);
double norm2(std::span<const double> v);
bool all_finite(std::span<const double> v);

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
// Throws SingularityError if a pivot is not safely positive.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& spd);

  std::size_t size() const noexcept { return factor_.rows(); }
  double min_pivot() const noexcept { return min_pivot_; }

  // In-place solve of A x = b.
  void solve_in_place(std::span<double> b) const;
  Vector solve(std::span<const double> b) const;
  // Solves A X = B column by column.
  Matrix solve(const Matrix& b) const;

 private:
  Matrix factor_;
  double min_pivot_ = 0.0;
};

}  // namespace safety_layer

#endif  // SAFETY_LAYER_LINALG_HPP_
