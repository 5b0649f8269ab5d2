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

// Dense inner-loop kernels of the safety filter.
//
// Every kernel has a portable scalar reference implementation and, on x86-64
// builds, an AVX2/FMA variant. The variant is chosen once at runtime from the
// CPU features (override with SAFETY_LAYER_KERNELS=scalar|avx2|auto or
// kernels::select()). Variants agree to rounding; each one is deterministic,
// but FMA contraction and a different summation order mean scalar and AVX2
// results are not bit-identical to each other.
//
// Matrices are row-major, contiguous, `rows * cols` doubles.

#ifndef SAFETY_LAYER_KERNELS_HPP_
#define SAFETY_LAYER_KERNELS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "safety_layer/linalg.hpp"

namespace safety_layer::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  const char* name;
  // y = x . y
  double (*dot)(std::span<const double> x, std::span<const double> y);
  // y += alpha * x
  void (*axpy)(double alpha, std::span<const double> x, std::span<double> y);
  // y = A x
  void (*gemv)(std::span<const double> a, std::size_t rows, std::size_t cols,
               std::span<const double> x, std::span<double> y);
  // y = A^T x
  void (*gemv_t)(std::span<const double> a, std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y);
  // out = A diag(w) A^T, a rows x rows symmetric matrix.
  void (*weighted_gram)(std::span<const double> a, std::size_t rows, std::size_t cols,
                        std::span<const double> w, std::span<double> out);
};

const KernelTable& scalar_table();
// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

bool available(Backend backend);
// Best backend supported by both the build and the running CPU.
Backend detect_best();
// Throws ContractViolation if the backend is unavailable.
void select(Backend backend);
const KernelTable& active();

std::optional<Backend> parse_backend(std::string_view name);
std::string_view backend_name(Backend backend);

// Matrix-typed conveniences over the active table.
Vector gemv(const Matrix& a, std::span<const double> x);
Vector gemv_t(const Matrix& a, std::span<const double> x);
Matrix weighted_gram(const Matrix& a, std::span<const double> w);

}  // namespace safety_layer::kernels

#endif  // SAFETY_LAYER_KERNELS_HPP_
