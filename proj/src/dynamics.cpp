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

#include "safety_layer/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "safety_layer/errors.hpp"

namespace safety_layer {

ControlAffineSystem::ControlAffineSystem(std::size_t n, std::size_t m, DriftFn drift,
                                         ControlMatrixFn control_matrix, Vector u_min,
                                         Vector u_max)
    : n_(n),
      m_(m),
      drift_(std::move(drift)),
      control_matrix_(std::move(control_matrix)),
      u_min_(std::move(u_min)),
      u_max_(std::move(u_max)) {
  if (!drift_ || !control_matrix_) throw ContractViolation("ControlAffineSystem: missing f or G");
  if (u_min_.size() != m_ || u_max_.size() != m_)
    throw ContractViolation("ControlAffineSystem: control bounds must have length m");
  for (std::size_t i = 0; i < m_; ++i) {
    if (!(u_min_[i] < u_max_[i]))
      throw ContractViolation("ControlAffineSystem: u_min must be < u_max (index " +
                              std::to_string(i) + ")");
  }
}

Vector ControlAffineSystem::drift(std::span<const double> s) const {
  if (s.size() != n_) throw ContractViolation("drift: state dimension mismatch");
  Vector f = drift_(s);
  if (f.size() != n_) throw ContractViolation("drift: f(s) must have length n");
  return f;
}

Matrix ControlAffineSystem::control_matrix(std::span<const double> s) const {
  if (s.size() != n_) throw ContractViolation("control_matrix: state dimension mismatch");
  Matrix g = control_matrix_(s);
  if (g.rows() != n_ || g.cols() != m_)
    throw ContractViolation("control_matrix: G(s) must be n x m");
  return g;
}

Vector ControlAffineSystem::velocity(std::span<const double> s, std::span<const double> u) const {
  if (u.size() != m_) throw ContractViolation("velocity: control dimension mismatch");
  Vector v = drift(s);
  const Matrix g = control_matrix(s);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < m_; ++j) v[i] += g(i, j) * u[j];
  return v;
}

Vector ControlAffineSystem::clamp_control(std::span<const double> u) const {
  if (u.size() != m_) throw ContractViolation("clamp_control: control dimension mismatch");
  Vector out(u.begin(), u.end());
  for (std::size_t i = 0; i < m_; ++i) out[i] = std::clamp(out[i], u_min_[i], u_max_[i]);
  return out;
}

Vector step(const ControlAffineSystem& system, std::span<const double> s,
            std::span<const double> u, double dt, Integrator method) {
  if (s.size() != system.state_dim()) throw ContractViolation("step: state dimension mismatch");
  if (u.size() != system.control_dim()) throw ContractViolation("step: control dimension mismatch");
  if (!(dt > 0.0)) throw ContractViolation("step: dt must be positive");
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < system.u_min()[i] || u[i] > system.u_max()[i])
      throw ContractViolation("step: control outside [u_min, u_max] at index " + std::to_string(i));
  }

  const std::size_t n = s.size();
  if (method == Integrator::kEuler) {
    Vector k1 = system.velocity(s, u);
    Vector out(s.begin(), s.end());
    for (std::size_t i = 0; i < n; ++i) out[i] += dt * k1[i];
    return out;
  }

  auto offset = [&](const Vector& k, double h) {
    Vector x(s.begin(), s.end());
    for (std::size_t i = 0; i < n; ++i) x[i] += h * k[i];
    return x;
  };
  const Vector k1 = system.velocity(s, u);
  const Vector k2 = system.velocity(offset(k1, 0.5 * dt), u);
  const Vector k3 = system.velocity(offset(k2, 0.5 * dt), u);
  const Vector k4 = system.velocity(offset(k3, dt), u);
  Vector out(s.begin(), s.end());
  for (std::size_t i = 0; i < n; ++i)
    out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

ControlAffineSystem make_velocity_integrator(std::span<const double> qd_max) {
  const std::size_t n = qd_max.size();
  if (n == 0) throw ContractViolation("make_velocity_integrator: n must be >= 1");
  Vector lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = -qd_max[i];
    hi[i] = qd_max[i];
  }
  return ControlAffineSystem(
      n, n, [n](std::span<const double>) { return Vector(n, 0.0); },
      [n](std::span<const double>) { return Matrix::identity(n); }, std::move(lo), std::move(hi));
}

ControlAffineSystem make_velocity_integrator(std::size_t n, double qd_max) {
  const Vector bounds(n, qd_max);
  return make_velocity_integrator(bounds);
}

void ArmModel::validate() const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(link_lengths[i] > 0.0))
      throw ContractViolation("ArmModel: link lengths must be positive");
    if (!(q_min[i] < q_max[i])) throw ContractViolation("ArmModel: q_min must be < q_max");
  }
  if (!(qd_max > 0.0)) throw ContractViolation("ArmModel: qd_max must be positive");
}

ArmPoints forward_kinematics(const ArmModel& arm, const JointVector& q) {
  ArmPoints out;
  out.points[0] = arm.base_position;
  double angle = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    angle += q[k];
    const double len = arm.link_lengths[k];
    out.points[k + 1] = out.points[k] + Vec2{len * std::cos(angle), len * std::sin(angle)};
  }
  return out;
}

Matrix point_jacobian(const ArmModel& arm, const JointVector& q, std::size_t index) {
  if (index < 1 || index > 3) throw ContractViolation("point_jacobian: index must be 1..3");
  // Absolute link directions.
  std::array<double, 3> angle{};
  double acc = 0.0;
  for (std::size_t k = 0; k < 3; ++k) angle[k] = (acc += q[k]);

  Matrix jac(2, 3);
  // Column k: sum over links k..index-1 of the link vector rotated by +90deg.
  for (std::size_t k = 0; k < index; ++k) {
    for (std::size_t l = k; l < index; ++l) {
      const double len = arm.link_lengths[l];
      jac(0, k) -= len * std::sin(angle[l]);
      jac(1, k) += len * std::cos(angle[l]);
    }
  }
  return jac;
}

Vector dls_inverse_kinematics(const Matrix& jacobian, Vec2 v_ee, double lambda) {
  if (jacobian.rows() != 2) throw ContractViolation("dls_inverse_kinematics: J must have 2 rows");
  if (!(lambda >= 0.0)) throw ContractViolation("dls_inverse_kinematics: lambda must be >= 0");
  const std::size_t n = jacobian.cols();

  double a = lambda * lambda, b = 0.0, d = lambda * lambda;
  for (std::size_t j = 0; j < n; ++j) {
    a += jacobian(0, j) * jacobian(0, j);
    b += jacobian(0, j) * jacobian(1, j);
    d += jacobian(1, j) * jacobian(1, j);
  }
  const double det = a * d - b * b;
  const double scale = std::max({a, d, 1.0});
  if (!(std::abs(det) > 64.0 * std::numeric_limits<double>::epsilon() * scale * scale)) {
    throw SingularityError(
        "dls_inverse_kinematics: J J^T + lambda^2 I is singular; use a damping lambda > 0");
  }
  // y = (J J^T + lambda^2 I)^-1 v
  const double y0 = (d * v_ee.x - b * v_ee.y) / det;
  const double y1 = (-b * v_ee.x + a * v_ee.y) / det;
  Vector qd(n);
  for (std::size_t j = 0; j < n; ++j) qd[j] = jacobian(0, j) * y0 + jacobian(1, j) * y1;
  return qd;
}

}  // namespace safety_layer
