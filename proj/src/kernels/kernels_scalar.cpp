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

// Reference kernels. Plain left-to-right loops; these define the expected
// results the vector variants are tested against.

#include "safety_layer/kernels.hpp"

namespace safety_layer::kernels {
namespace {

double dot_scalar(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void gemv_scalar(std::span<const double> a, std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = dot_scalar(a.subspan(i * cols, cols), x);
}

void gemv_t_scalar(std::span<const double> a, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<double> y) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) axpy_scalar(x[i], a.subspan(i * cols, cols), y);
}

void weighted_gram_scalar(std::span<const double> a, std::size_t rows, std::size_t cols,
                          std::span<const double> w, std::span<double> out) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* ai = a.data() + i * cols;
    for (std::size_t j = 0; j <= i; ++j) {
      const double* aj = a.data() + j * cols;
      double s = 0.0;
      for (std::size_t p = 0; p < cols; ++p) s += ai[p] * w[p] * aj[p];
      out[i * rows + j] = s;
      out[j * rows + i] = s;
    }
  }
}

constexpr KernelTable kScalarTable{
    Backend::kScalar, "scalar", dot_scalar, axpy_scalar, gemv_scalar, gemv_t_scalar,
    weighted_gram_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalarTable; }

}  // namespace safety_layer::kernels
