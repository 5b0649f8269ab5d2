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

#include <atomic>
#include <cstdlib>
#include <string>

#include "safety_layer/errors.hpp"
#include "safety_layer/kernels.hpp"

namespace safety_layer::kernels {

#if defined(SAFETY_LAYER_HAVE_AVX2)
namespace detail {
const KernelTable* avx2_table_impl();
}
const KernelTable* avx2_table() { return detail::avx2_table_impl(); }
#else
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(SAFETY_LAYER_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return &scalar_table();
    case Backend::kAvx2:
      return cpu_has_avx2() ? avx2_table() : nullptr;
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("SAFETY_LAYER_KERNELS")) {
    const std::string_view name(env);
    if (name != "auto") {
      if (auto b = parse_backend(name)) {
        if (const KernelTable* t = table_for(*b)) return t;
      }
    }
  }
  return table_for(detect_best());
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

bool available(Backend backend) { return table_for(backend) != nullptr; }

Backend detect_best() { return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar; }

void select(Backend backend) {
  const KernelTable* t = table_for(backend);
  if (t == nullptr) {
    throw ContractViolation("kernel backend '" + std::string(backend_name(backend)) +
                            "' is not available on this build/CPU");
  }
  active_slot().store(t, std::memory_order_release);
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

std::optional<Backend> parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "auto") return detect_best();
  return std::nullopt;
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

Vector gemv(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ContractViolation("gemv: dimension mismatch");
  Vector y(a.rows());
  active().gemv(a.values(), a.rows(), a.cols(), x, y);
  return y;
}

Vector gemv_t(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw ContractViolation("gemv_t: dimension mismatch");
  Vector y(a.cols());
  active().gemv_t(a.values(), a.rows(), a.cols(), x, y);
  return y;
}

Matrix weighted_gram(const Matrix& a, std::span<const double> w) {
  if (a.cols() != w.size()) throw ContractViolation("weighted_gram: weight length mismatch");
  Matrix out(a.rows(), a.rows());
  active().weighted_gram(a.values(), a.rows(), a.cols(), w,
                         std::span<double>(out.data(), a.rows() * a.rows()));
  return out;
}

}  // namespace safety_layer::kernels
