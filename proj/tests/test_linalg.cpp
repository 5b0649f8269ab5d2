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

#include <doctest.h>

#include <cmath>

#include "safety_layer/errors.hpp"
#include "safety_layer/kernels.hpp"
#include "safety_layer/linalg.hpp"
#include "test_support.hpp"

using namespace safety_layer;
using safety_layer::testing::Gen;

TEST_CASE("matrix basics") {
  const Matrix a{{1.0, 2.0}, {3.0, 4.0}};
  const Matrix b = a * Matrix::identity(2);
  CHECK(a == b);
  CHECK(a.transpose()(0, 1) == 3.0);
  CHECK(a.max_abs() == 4.0);
  const Vector x{1.0, -1.0};
  const Vector y = a * std::span<const double>(x);
  CHECK(y == Vector{-1.0, -1.0});
  CHECK((a - a).max_abs() == 0.0);
  const Vector d{2.0, 5.0};
  CHECK(Matrix::diagonal(d)(1, 1) == 5.0);
  CHECK_THROWS_AS(a * Matrix(3, 3), ContractViolation);
}

TEST_CASE("cholesky solves spd systems") {
  Gen gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + gen.index(8);
    const Matrix b = gen.matrix(n, n + 2);
    Matrix a = b * b.transpose();
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.1;
    const Vector rhs = gen.vector(n);
    const Vector x = Cholesky(a).solve(rhs);
    const Vector back = a * std::span<const double>(x);
    CHECK(testing::max_abs_diff(back, rhs) < 1e-10);
  }
}

TEST_CASE("cholesky rejects singular and indefinite matrices") {
  CHECK_THROWS_AS(Cholesky(Matrix{{1.0, 1.0}, {1.0, 1.0}}), SingularityError);
  CHECK_THROWS_AS(Cholesky(Matrix{{1.0, 0.0}, {0.0, -1.0}}), SingularityError);
  CHECK_THROWS_AS(Cholesky(Matrix(2, 3)), ContractViolation);
}

TEST_CASE("kernel backends agree") {
  const kernels::KernelTable& ref = kernels::scalar_table();
  const kernels::KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr || !kernels::available(kernels::Backend::kAvx2)) {
    MESSAGE("AVX2 kernels unavailable; only the scalar reference runs");
    return;
  }
  Gen gen(2);
  // Sizes straddle the 4-wide vector length and its remainders.
  for (std::size_t rows : {1u, 3u, 4u, 5u, 18u, 21u}) {
    for (std::size_t cols : {1u, 2u, 4u, 7u, 8u, 21u, 33u}) {
      const Matrix a = gen.matrix(rows, cols);
      const Vector x = gen.vector(cols);
      const Vector xt = gen.vector(rows);
      const Vector w = gen.vector(cols, 0.5, 100.0);

      CHECK(std::abs(ref.dot(x, x) - simd->dot(x, x)) <= 1e-13 * (1.0 + ref.dot(x, x)));

      Vector y1(cols, 0.25), y2(cols, 0.25);
      ref.axpy(-1.5, x, y1);
      simd->axpy(-1.5, x, y2);
      CHECK(testing::max_abs_diff(y1, y2) <= 1e-14);

      Vector g1(rows), g2(rows);
      ref.gemv(a.values(), rows, cols, x, g1);
      simd->gemv(a.values(), rows, cols, x, g2);
      CHECK(testing::max_abs_diff(g1, g2) <= 1e-13);

      Vector t1(cols), t2(cols);
      ref.gemv_t(a.values(), rows, cols, xt, t1);
      simd->gemv_t(a.values(), rows, cols, xt, t2);
      CHECK(testing::max_abs_diff(t1, t2) <= 1e-13);

      Matrix w1(rows, rows), w2(rows, rows);
      ref.weighted_gram(a.values(), rows, cols, w, {w1.data(), rows * rows});
      simd->weighted_gram(a.values(), rows, cols, w, {w2.data(), rows * rows});
      CHECK((w1 - w2).max_abs() <= 1e-12 * (1.0 + w1.max_abs()));
      CHECK(w1 == w1.transpose());
      CHECK(w2 == w2.transpose());
    }
  }
}

TEST_CASE("weighted gram matches the dense product") {
  Gen gen(3);
  const Matrix a = gen.matrix(5, 9);
  const Vector w = gen.vector(9, 0.1, 3.0);
  const Matrix expect = a * Matrix::diagonal(w) * a.transpose();
  CHECK((kernels::weighted_gram(a, w) - expect).max_abs() < 1e-12);
}

TEST_CASE("kernel selection") {
  const kernels::Backend before = kernels::active().backend;
  CHECK(kernels::parse_backend("scalar") == kernels::Backend::kScalar);
  CHECK(kernels::parse_backend("avx2") == kernels::Backend::kAvx2);
  CHECK_FALSE(kernels::parse_backend("neon").has_value());
  kernels::select(kernels::Backend::kScalar);
  CHECK(kernels::active().backend == kernels::Backend::kScalar);
  if (!kernels::available(kernels::Backend::kAvx2)) {
    CHECK_THROWS_AS(kernels::select(kernels::Backend::kAvx2), ContractViolation);
  }
  kernels::select(before);
}
