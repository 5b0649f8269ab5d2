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

#include "safety_layer/linalg.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "safety_layer/errors.hpp"

namespace safety_layer {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ContractViolation("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::max_abs() const { return safety_layer::max_abs(data_); }

bool Matrix::all_finite() const { return safety_layer::all_finite(data_); }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ContractViolation("Matrix product: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aip * b(p, j);
    }
  }
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation("Matrix difference: shape mismatch");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, j);
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation("Matrix sum: shape mismatch");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, j);
  return out;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ContractViolation("Matrix-vector product: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Cholesky::Cholesky(const Matrix& spd) : factor_(spd.rows(), spd.cols()) {
  const std::size_t n = spd.rows();
  if (spd.cols() != n) throw ContractViolation("Cholesky: matrix is not square");
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(spd(i, i)));
  // Pivots below this are indistinguishable from a rank-deficient matrix.
  const double tiny = scale * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  min_pivot_ = n ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double d = spd(j, j);
    for (std::size_t p = 0; p < j; ++p) d -= factor_(j, p) * factor_(j, p);
    if (!(d > tiny)) {
      throw SingularityError("Cholesky: matrix is singular or not positive definite (pivot " +
                             std::to_string(j) + " = " + std::to_string(d) + ")");
    }
    const double ljj = std::sqrt(d);
    factor_(j, j) = ljj;
    min_pivot_ = std::min(min_pivot_, d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = spd(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= factor_(i, p) * factor_(j, p);
      factor_(i, j) = s / ljj;
    }
  }
}

void Cholesky::solve_in_place(std::span<double> b) const {
  const std::size_t n = size();
  if (b.size() != n) throw ContractViolation("Cholesky::solve: dimension mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t p = 0; p < i; ++p) s -= factor_(i, p) * b[p];
    b[i] = s / factor_(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t p = i + 1; p < n; ++p) s -= factor_(p, i) * b[p];
    b[i] = s / factor_(i, i);
  }
}

Vector Cholesky::solve(std::span<const double> b) const {
  Vector x(b.begin(), b.end());
  solve_in_place(x);
  return x;
}

Matrix Cholesky::solve(const Matrix& b) const {
  if (b.rows() != size()) throw ContractViolation("Cholesky::solve: dimension mismatch");
  Matrix x(b.rows(), b.cols());
  Vector col(b.rows());
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t r = 0; r < b.rows(); ++r) col[r] = b(r, c);
    solve_in_place(col);
    for (std::size_t r = 0; r < b.rows(); ++r) x(r, c) = col[r];
  }
  return x;
}

}  // namespace safety_layer
