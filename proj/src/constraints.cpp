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

#include "safety_layer/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "safety_layer/errors.hpp"

namespace safety_layer {

ConstraintSet::ConstraintSet(std::size_t state_dim) : n_(state_dim) {}

ConstraintSet::ConstraintSet(std::size_t state_dim, std::vector<std::string> labels, EvalFn fn)
    : n_(state_dim), labels_(std::move(labels)) {
  if (!fn) throw ContractViolation("ConstraintSet: missing evaluation function");
  blocks_.push_back({labels_.size(), std::move(fn)});
  row_scale_.assign(labels_.size(), 1.0);
}

ConstraintSet ConstraintSet::stack(const std::vector<ConstraintSet>& parts) {
  if (parts.empty()) throw ContractViolation("ConstraintSet::stack: nothing to stack");
  ConstraintSet out(parts.front().n_);
  for (const auto& part : parts) {
    if (part.n_ != out.n_) throw ContractViolation("ConstraintSet::stack: state dimensions differ");
    out.labels_.insert(out.labels_.end(), part.labels_.begin(), part.labels_.end());
    out.blocks_.insert(out.blocks_.end(), part.blocks_.begin(), part.blocks_.end());
    out.row_scale_.insert(out.row_scale_.end(), part.row_scale_.begin(), part.row_scale_.end());
  }
  return out;
}

void ConstraintSet::set_row_scale(Vector scale) {
  if (scale.size() != size()) throw ContractViolation("set_row_scale: length must equal k");
  for (double w : scale)
    if (!(w > 0.0)) throw ContractViolation("set_row_scale: weights must be positive");
  row_scale_ = std::move(scale);
}

ConstraintEvaluation ConstraintSet::evaluate(std::span<const double> s) const {
  if (s.size() != n_) throw ContractViolation("ConstraintSet::evaluate: state dimension mismatch");
  ConstraintEvaluation out{Vector(size()), Matrix(size(), n_)};
  std::size_t row = 0;
  for (const auto& block : blocks_) {
    const ConstraintEvaluation part = block.fn(s);
    if (part.values.size() != block.rows || part.jacobian.rows() != block.rows ||
        part.jacobian.cols() != n_) {
      throw ContractViolation("ConstraintSet::evaluate: block returned wrong dimensions");
    }
    for (std::size_t i = 0; i < block.rows; ++i, ++row) {
      out.values[row] = part.values[i];
      const auto src = part.jacobian.row(i);
      std::copy(src.begin(), src.end(), out.jacobian.row(row).begin());
      if (!std::isfinite(part.values[i]) || !all_finite(src))
        throw NumericError("constraint '" + labels_[row] + "' evaluated to a non-finite value");
    }
  }
  return out;
}

Matrix finite_difference_jacobian(const VectorFn& g, std::span<const double> s, double h) {
  if (!(h > 0.0)) throw ContractViolation("finite_difference_jacobian: h must be positive");
  Vector x(s.begin(), s.end());
  const std::size_t n = x.size();
  Matrix jac;
  for (std::size_t j = 0; j < n; ++j) {
    const double saved = x[j];
    x[j] = saved + h;
    const Vector plus = g(x);
    x[j] = saved - h;
    const Vector minus = g(x);
    x[j] = saved;
    if (j == 0) jac = Matrix(plus.size(), n);
    for (std::size_t i = 0; i < plus.size(); ++i) jac(i, j) = (plus[i] - minus[i]) / (2.0 * h);
  }
  return jac;
}

ConstraintSet box_constraints(std::span<const double> lo, std::span<const double> hi,
                              std::span<const std::size_t> select, const std::string& name) {
  if (select.empty()) throw ContractViolation("box_constraints: empty selection");
  if (lo.size() != hi.size()) throw ContractViolation("box_constraints: lo/hi length mismatch");
  const std::size_t n = lo.size();
  std::vector<std::size_t> idx(select.begin(), select.end());
  Vector lo_sel, hi_sel;
  std::vector<std::string> labels;
  for (std::size_t i : idx) {
    if (i >= n) throw ContractViolation("box_constraints: index out of range");
    if (!(lo[i] < hi[i])) throw ContractViolation("box_constraints: lo must be < hi");
    lo_sel.push_back(lo[i]);
    hi_sel.push_back(hi[i]);
    labels.push_back(name + "[" + std::to_string(i) + "].upper");
    labels.push_back(name + "[" + std::to_string(i) + "].lower");
  }
  auto fn = [n, idx, lo_sel, hi_sel](std::span<const double> s) {
    ConstraintEvaluation e{Vector(2 * idx.size()), Matrix(2 * idx.size(), n)};
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const std::size_t i = idx[r];
      e.values[2 * r] = s[i] - hi_sel[r];
      e.values[2 * r + 1] = lo_sel[r] - s[i];
      e.jacobian(2 * r, i) = 1.0;
      e.jacobian(2 * r + 1, i) = -1.0;
    }
    return e;
  };
  return ConstraintSet(n, std::move(labels), std::move(fn));
}

ConstraintSet point_in_rectangle_constraints(std::size_t state_dim, PointMap point, Rect rect,
                                             double margin, const std::string& name) {
  if (!point) throw ContractViolation("point_in_rectangle_constraints: missing point map");
  const Rect shrunk{rect.x_lo + margin, rect.x_hi - margin, rect.y_lo + margin,
                    rect.y_hi - margin};
  if (!(shrunk.x_lo < shrunk.x_hi) || !(shrunk.y_lo < shrunk.y_hi))
    throw ContractViolation("point_in_rectangle_constraints: rectangle degenerate after margin");
  std::vector<std::string> labels{name + ".x_max", name + ".x_min", name + ".y_max",
                                  name + ".y_min"};
  auto fn = [state_dim, point = std::move(point), shrunk](std::span<const double> s) {
    const PointWithJacobian p = point(s);
    if (p.jacobian.rows() != 2 || p.jacobian.cols() != state_dim)
      throw ContractViolation("point_in_rectangle_constraints: point Jacobian must be 2 x n");
    ConstraintEvaluation e{Vector(4), Matrix(4, state_dim)};
    e.values[0] = p.point.x - shrunk.x_hi;
    e.values[1] = shrunk.x_lo - p.point.x;
    e.values[2] = p.point.y - shrunk.y_hi;
    e.values[3] = shrunk.y_lo - p.point.y;
    for (std::size_t j = 0; j < state_dim; ++j) {
      e.jacobian(0, j) = p.jacobian(0, j);
      e.jacobian(1, j) = -p.jacobian(0, j);
      e.jacobian(2, j) = p.jacobian(1, j);
      e.jacobian(3, j) = -p.jacobian(1, j);
    }
    return e;
  };
  return ConstraintSet(state_dim, std::move(labels), std::move(fn));
}

double max_violation(std::span<const double> values) {
  double worst = 0.0;
  for (double v : values) worst = std::max(worst, v);
  return worst;
}

double max_violation(std::span<const double> values, std::span<const double> row_scale) {
  if (values.size() != row_scale.size())
    throw ContractViolation("max_violation: scale length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) worst = std::max(worst, row_scale[i] * values[i]);
  return worst;
}

}  // namespace safety_layer
