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

// AVX2/FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the dispatcher has checked the CPU.

#include <immintrin.h>

#include "safety_layer/kernels.hpp"

namespace safety_layer::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double* px = x.data();
  const double* py = y.data();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(px + i + 4), _mm256_loadu_pd(py + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += px[i] * py[i];
  return s;
}

void axpy_avx2(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const double* px = x.data();
  double* py = y.data();
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(py + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i)));
  }
  for (; i < n; ++i) py[i] += alpha * px[i];
}

void gemv_avx2(std::span<const double> a, std::size_t rows, std::size_t cols,
               std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = dot_avx2(a.subspan(i * cols, cols), x);
}

void gemv_t_avx2(std::span<const double> a, std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) axpy_avx2(x[i], a.subspan(i * cols, cols), y);
}

void weighted_gram_avx2(std::span<const double> a, std::size_t rows, std::size_t cols,
                        std::span<const double> w, std::span<double> out) {
  const double* pw = w.data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* ai = a.data() + i * cols;
    for (std::size_t j = 0; j <= i; ++j) {
      const double* aj = a.data() + j * cols;
      __m256d acc = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= cols; p += 4) {
        const __m256d wa = _mm256_mul_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(pw + p));
        acc = _mm256_fmadd_pd(wa, _mm256_loadu_pd(aj + p), acc);
      }
      double s = hsum(acc);
      for (; p < cols; ++p) s += ai[p] * pw[p] * aj[p];
      out[i * rows + j] = s;
      out[j * rows + i] = s;
    }
  }
}

constexpr KernelTable kAvx2Table{
    Backend::kAvx2, "avx2", dot_avx2, axpy_avx2, gemv_avx2, gemv_t_avx2, weighted_gram_avx2,
};

}  // namespace

namespace detail {
const KernelTable* avx2_table_impl() { return &kAvx2Table; }
}  // namespace detail

}  // namespace safety_layer::kernels
