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

// Stacked inequality constraints g(s) <= 0 over the dynamical state, with
// analytic Jacobians. A state is safe iff every row is <= 0.

#ifndef SAFETY_LAYER_CONSTRAINTS_HPP_
#define SAFETY_LAYER_CONSTRAINTS_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "safety_layer/linalg.hpp"

namespace safety_layer {

struct ConstraintEvaluation {
  Vector values;    // k
  Matrix jacobian;  // k x n
};

class ConstraintSet {
 public:
  using EvalFn = std::function<ConstraintEvaluation(std::span<const double>)>;

  // Empty set (k = 0) over an n-dimensional state.
  explicit ConstraintSet(std::size_t state_dim);
  ConstraintSet(std::size_t state_dim, std::vector<std::string> labels, EvalFn fn);

  // Concatenation in declaration order. All parts must share the state
  // dimension.
  static ConstraintSet stack(const std::vector<ConstraintSet>& parts);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t state_dim() const noexcept { return n_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  // Optional per-row scaling for the violation metric; all ones by default.
  const Vector& row_scale() const noexcept { return row_scale_; }
  void set_row_scale(Vector scale);

  // values = g(s), jacobian = dg/ds. Throws NumericError naming the first
  // row with a non-finite value or Jacobian entry.
  ConstraintEvaluation evaluate(std::span<const double> s) const;

 private:
  struct Block {
    std::size_t rows;
    EvalFn fn;
  };

  std::size_t n_;
  std::vector<std::string> labels_;
  std::vector<Block> blocks_;
  Vector row_scale_;
};

inline ConstraintEvaluation evaluate(const ConstraintSet& set, std::span<const double> s) {
  return set.evaluate(s);
}

using VectorFn = std::function<Vector(std::span<const double>)>;

// Central differences, one column per state coordinate.
Matrix finite_difference_jacobian(const VectorFn& g, std::span<const double> s, double h);

// For each selected index i: rows s_i - hi_i <= 0 and lo_i - s_i <= 0.
ConstraintSet box_constraints(std::span<const double> lo, std::span<const double> hi,
                              std::span<const std::size_t> select,
                              const std::string& name = "box");

struct PointWithJacobian {
  Vec2 point;
  Matrix jacobian;  // 2 x n
};
using PointMap = std::function<PointWithJacobian(std::span<const double>)>;

struct Rect {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
};

// Four rows keeping point(s) inside `rect` shrunk by `margin` (negative
// margins grow it): x - (x_hi - m), (x_lo + m) - x, y - (y_hi - m),
// (y_lo + m) - y.
ConstraintSet point_in_rectangle_constraints(std::size_t state_dim, PointMap point, Rect rect,
                                             double margin, const std::string& name = "point");

// max(0, max_i values_i); 0 for an empty vector.
double max_violation(std::span<const double> values);
// Same with per-row scaling.
double max_violation(std::span<const double> values, std::span<const double> row_scale);

}  // namespace safety_layer

#endif  // SAFETY_LAYER_CONSTRAINTS_HPP_
