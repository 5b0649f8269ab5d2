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

#ifndef SAFETY_LAYER_DYNAMICS_HPP_
#define SAFETY_LAYER_DYNAMICS_HPP_

#include <array>
#include <cstddef>
#include <functional>
#include <span>

#include "safety_layer/linalg.hpp"

namespace safety_layer {

// s_dot = f(s) + G(s) u, with box bounds on u.
class ControlAffineSystem {
 public:
  using DriftFn = std::function<Vector(std::span<const double>)>;
  using ControlMatrixFn = std::function<Matrix(std::span<const double>)>;

  // Throws ContractViolation unless u_min < u_max componentwise and both have
  // length m.
  ControlAffineSystem(std::size_t n, std::size_t m, DriftFn drift, ControlMatrixFn control_matrix,
                      Vector u_min, Vector u_max);

  std::size_t state_dim() const noexcept { return n_; }
  std::size_t control_dim() const noexcept { return m_; }
  const Vector& u_min() const noexcept { return u_min_; }
  const Vector& u_max() const noexcept { return u_max_; }

  // Both check the returned dimensions.
  Vector drift(std::span<const double> s) const;
  Matrix control_matrix(std::span<const double> s) const;

  // f(s) + G(s) u
  Vector velocity(std::span<const double> s, std::span<const double> u) const;

  Vector clamp_control(std::span<const double> u) const;

 private:
  std::size_t n_;
  std::size_t m_;
  DriftFn drift_;
  ControlMatrixFn control_matrix_;
  Vector u_min_;
  Vector u_max_;
};

enum class Integrator { kEuler, kRk4 };

// Advances s by dt holding u constant. rk4 is the classical four-stage rule.
Vector step(const ControlAffineSystem& system, std::span<const double> s,
            std::span<const double> u, double dt, Integrator method = Integrator::kRk4);

// f = 0, G = I, |u_i| <= qd_max.
ControlAffineSystem make_velocity_integrator(std::size_t n, double qd_max);
ControlAffineSystem make_velocity_integrator(std::span<const double> qd_max);

// ---------------------------------------------------------------------------
// Planar three-link arm.

using JointVector = std::array<double, 3>;

struct ArmModel {
  std::array<double, 3> link_lengths{0.5, 0.4, 0.3};
  Vec2 base_position{-0.1, 0.5};
  JointVector q_min{-2.9, -2.9, -2.9};
  JointVector q_max{2.9, 2.9, 2.9};
  double qd_max = 2.0;

  // Throws ContractViolation on non-positive links, q_min >= q_max or
  // qd_max <= 0.
  void validate() const;
};

// Base followed by the three link endpoints; points[3] is the end-effector.
struct ArmPoints {
  std::array<Vec2, 4> points;
  const Vec2& ee() const { return points[3]; }
};

ArmPoints forward_kinematics(const ArmModel& arm, const JointVector& q);

// 2x3 Jacobian of link endpoint `index` (1..3) with respect to q. Columns of
// joints beyond `index` are zero.
Matrix point_jacobian(const ArmModel& arm, const JointVector& q, std::size_t index);

inline Matrix ee_jacobian(const ArmModel& arm, const JointVector& q) {
  return point_jacobian(arm, q, 3);
}

// q_dot = J^T (J J^T + lambda^2 I)^-1 v for a 2 x n Jacobian. Throws
// SingularityError when the 2x2 system cannot be inverted (lambda = 0 with a
// rank-deficient J); use lambda > 0 there.
Vector dls_inverse_kinematics(const Matrix& jacobian, Vec2 v_ee, double lambda);

}  // namespace safety_layer

#endif  // SAFETY_LAYER_DYNAMICS_HPP_
