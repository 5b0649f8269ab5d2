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

#include "safety_layer/safety_filter.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "safety_layer/kernels.hpp"

namespace safety_layer {
namespace {

// Above this beta*mu, exp(beta*mu) is far beyond the precision of log1p.
constexpr double kSoftplusLinearRegion = 30.0;

// Relative excess over a control bound that counts as an actual clip rather
// than round-off.
constexpr double kClipSlack = 1e-12;

// min pivot of J_c W J_c^T below this (relative to its scale) means the rank
// comes from the damping term, not from the constraints.
constexpr double kRankPivotFloor = 1e-12;

}  // namespace

void FilterConfig::validate() const {
  if (!(error_gain > 0.0)) throw ContractViolation("FilterConfig: error_gain must be > 0");
  for (double k : error_gain_per_row)
    if (!(k > 0.0)) throw ContractViolation("FilterConfig: per-row error gains must be > 0");
  if (!(slack_beta > 0.0)) throw ContractViolation("FilterConfig: slack_beta must be > 0");
  if (!(slack_weight >= 1.0)) throw ContractViolation("FilterConfig: slack_weight must be >= 1");
  if (!(damping >= 0.0)) throw ContractViolation("FilterConfig: damping must be >= 0");
  if (!(slack_floor > 0.0)) throw ContractViolation("FilterConfig: slack_floor must be > 0");
  if (!(violation_tolerance >= 0.0))
    throw ContractViolation("FilterConfig: violation_tolerance must be >= 0");
}

double slack_map(double mu, double beta) {
  const double x = beta * mu;
  if (x > kSoftplusLinearRegion) return mu + std::exp(-x) / beta;
  return std::log1p(std::exp(x)) / beta;
}

double slack_map_derivative(double mu, double beta) { return 1.0 / (1.0 + std::exp(-beta * mu)); }

double slack_map_inverse(double y, double beta) {
  if (!(y > 0.0)) throw ContractViolation("slack_map_inverse: argument must be positive");
  const double x = beta * y;
  if (x > kSoftplusLinearRegion) return y + std::log1p(-std::exp(-x)) / beta;
  return std::log(std::expm1(x)) / beta;
}

Vector slack_map(std::span<const double> mu, double beta) {
  Vector out(mu.size());
  std::transform(mu.begin(), mu.end(), out.begin(), [beta](double m) { return slack_map(m, beta); });
  return out;
}

Vector slack_map_derivative(std::span<const double> mu, double beta) {
  Vector out(mu.size());
  std::transform(mu.begin(), mu.end(), out.begin(),
                 [beta](double m) { return slack_map_derivative(m, beta); });
  return out;
}

SlackState initialize_slack(std::span<const double> g_values, double beta, double slack_floor) {
  if (!(beta > 0.0) || !(slack_floor > 0.0))
    throw ContractViolation("initialize_slack: beta and slack_floor must be positive");
  const double cap = 50.0 / beta;
  SlackState slack{Vector(g_values.size())};
  for (std::size_t i = 0; i < g_values.size(); ++i) {
    const double target = std::max(-g_values[i], slack_floor);
    slack.mu[i] = std::clamp(slack_map_inverse(target, beta), -cap, cap);
  }
  return slack;
}

Matrix augmented_jacobian(const Matrix& constraint_jacobian, const Matrix& control_matrix,
                          std::span<const double> mu, double beta) {
  const std::size_t k = constraint_jacobian.rows();
  const std::size_t n = constraint_jacobian.cols();
  const std::size_t m = control_matrix.cols();
  if (control_matrix.rows() != n)
    throw ContractViolation("augmented_jacobian: J_g is k x n but G is not n x m");
  if (mu.size() != k) throw ContractViolation("augmented_jacobian: mu must have length k");

  Matrix jc(k, m + k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t p = 0; p < n; ++p) {
      const double a = constraint_jacobian(i, p);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) jc(i, j) += a * control_matrix(p, j);
    }
    jc(i, m + i) = slack_map_derivative(mu[i], beta);
  }
  return jc;
}

Vector tangent_weights(std::size_t m, std::size_t k, double slack_weight) {
  Vector w(m + k, 1.0);
  std::fill(w.begin() + static_cast<std::ptrdiff_t>(m), w.end(), slack_weight);
  return w;
}

namespace {

void check_weights(const Matrix& jacobian, std::span<const double> weights, double lambda) {
  if (weights.size() != jacobian.cols())
    throw ContractViolation("weighted pseudoinverse: weight vector must match J's columns");
  for (double w : weights)
    if (!(w > 0.0)) throw ContractViolation("weighted pseudoinverse: weights must be positive");
  if (!(lambda >= 0.0)) throw ContractViolation("weighted pseudoinverse: lambda must be >= 0");
}

// J W J^T + lambda^2 I
Matrix damped_gram(const Matrix& jacobian, std::span<const double> weights, double lambda) {
  Matrix a = kernels::weighted_gram(jacobian, weights);
  const double l2 = lambda * lambda;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += l2;
  return a;
}

}  // namespace

Matrix weighted_pseudoinverse(const Matrix& jacobian, std::span<const double> weights,
                              double lambda) {
  check_weights(jacobian, weights, lambda);
  const std::size_t k = jacobian.rows();
  const std::size_t cols = jacobian.cols();
  const Cholesky chol(damped_gram(jacobian, weights, lambda));
  // (A^-1 J)^T W = (W J^T A^-1) since A is symmetric.
  const Matrix x = chol.solve(jacobian);  // k x cols
  Matrix pinv(cols, k);
  for (std::size_t r = 0; r < cols; ++r)
    for (std::size_t c = 0; c < k; ++c) pinv(r, c) = weights[r] * x(c, r);
  return pinv;
}

Matrix tangent_projector(const Matrix& jacobian, std::span<const double> weights, double lambda) {
  const Matrix pinv = weighted_pseudoinverse(jacobian, weights, lambda);
  return Matrix::identity(jacobian.cols()) - pinv * jacobian;
}

SafetyFilter::SafetyFilter(ControlAffineSystem system, ConstraintSet constraints,
                           FilterConfig config)
    : system_(std::move(system)), constraints_(std::move(constraints)), config_(std::move(config)) {
  config_.validate();
  if (constraints_.state_dim() != system_.state_dim())
    throw ContractViolation("SafetyFilter: constraint and system state dimensions differ");
  if (!config_.error_gain_per_row.empty() &&
      config_.error_gain_per_row.size() != constraints_.size())
    throw ContractViolation("SafetyFilter: per-row error gains must have length k");
}

void SafetyFilter::reset(std::span<const double> s) {
  const ConstraintEvaluation e = constraints_.evaluate(s);
  slack_ = initialize_slack(e.values, config_.slack_beta, config_.slack_floor);
  diagnostics_ = {};
  initialized_ = true;
}

void SafetyFilter::set_slack(SlackState slack) {
  if (slack.mu.size() != constraints_.size())
    throw ContractViolation("set_slack: mu must have length k");
  slack_ = std::move(slack);
  initialized_ = true;
}

FilterOutput SafetyFilter::filter_action(std::span<const double> s, std::span<const double> u_nom) {
  const std::size_t m = system_.control_dim();
  const std::size_t k = constraints_.size();
  if (!initialized_ || slack_.mu.size() != k)
    throw ContractViolation("filter_action: slack not initialized; call reset() first");
  if (u_nom.size() != m) throw ContractViolation("filter_action: u_nom must have length m");
  if (!all_finite(u_nom)) throw ContractViolation("filter_action: u_nom must be finite");
  ++calls_;

  FilterDiagnostics diag;
  const double beta = config_.slack_beta;
  const ConstraintEvaluation e = constraints_.evaluate(s);
  const Vector f = system_.drift(s);
  const Matrix g_ctrl = system_.control_matrix(s);

  Vector c = slack_map(slack_.mu, beta);
  for (std::size_t i = 0; i < k; ++i) c[i] += e.values[i];
  diag.c_norm = norm2(c);

  const Matrix jc = augmented_jacobian(e.jacobian, g_ctrl, slack_.mu, beta);
  const Vector w = tangent_weights(m, k, config_.slack_weight);
  Matrix gram = kernels::weighted_gram(jc, w);
  Matrix damped = gram;
  const double l2 = config_.damping * config_.damping;
  for (std::size_t i = 0; i < k; ++i) damped(i, i) += l2;
  const Cholesky chol(damped);
  {
    double scale = 1.0;
    for (std::size_t i = 0; i < k; ++i) scale = std::max(scale, gram(i, i));
    diag.rank_ok = k == 0 || chol.min_pivot() > l2 + kRankPivotFloor * scale;
  }

  // Correction: -J_c^+ (J_g f + K_c c).
  Vector rhs = kernels::gemv(e.jacobian, f);
  for (std::size_t i = 0; i < k; ++i) {
    const double gain =
        config_.error_gain_per_row.empty() ? config_.error_gain : config_.error_gain_per_row[i];
    rhs[i] += gain * c[i];
  }
  chol.solve_in_place(rhs);
  Vector v_corr = kernels::gemv_t(jc, rhs);
  for (std::size_t j = 0; j < m + k; ++j) v_corr[j] *= -w[j];

  // Tangent: [u; 0] - J_c^+ J_c [u; 0]; J_c [u; 0] only touches the control block.
  Vector embedded(m + k, 0.0);
  std::copy(u_nom.begin(), u_nom.end(), embedded.begin());
  Vector y = kernels::gemv(jc, embedded);
  chol.solve_in_place(y);
  Vector v_tan = kernels::gemv_t(jc, y);
  for (std::size_t j = 0; j < m + k; ++j) v_tan[j] = embedded[j] - w[j] * v_tan[j];

  // J_c P = J_c - (J_c W J_c^T) A^-1 J_c
  {
    const Matrix x = chol.solve(jc);
    diag.projector_residual = (jc - gram * x).max_abs();
  }

  if (!all_finite(v_corr) || !all_finite(v_tan) || !std::isfinite(diag.c_norm)) {
    throw FilterNumericError("filter_action: non-finite intermediate result", diag);
  }

  // Largest alpha in [0, 1] keeping u_corr + alpha * u_tan inside the bounds.
  const Vector& lo = system_.u_min();
  const Vector& hi = system_.u_max();
  double alpha = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double t = v_tan[i];
    if (t > 0.0) {
      alpha = std::min(alpha, (hi[i] - v_corr[i]) / t);
    } else if (t < 0.0) {
      alpha = std::min(alpha, (lo[i] - v_corr[i]) / t);
    }
  }
  alpha = std::clamp(alpha, 0.0, 1.0);
  diag.tangent_scale = alpha;

  FilterOutput out;
  out.u_safe.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double u = v_corr[i] + alpha * v_tan[i];
    const double clipped = std::clamp(u, lo[i], hi[i]);
    const double tol = kClipSlack * std::max({1.0, std::abs(lo[i]), std::abs(hi[i])});
    if (u > hi[i] + tol || u < lo[i] - tol) diag.correction_clipped = true;
    out.u_safe[i] = clipped;
  }
  out.mu_dot.resize(k);
  for (std::size_t i = 0; i < k; ++i) out.mu_dot[i] = v_corr[m + i] + alpha * v_tan[m + i];

  out.diagnostics = diag;
  diagnostics_ = diag;
  return out;
}

void SafetyFilter::advance_slack(std::span<const double> mu_dot, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("advance_slack: dt must be positive");
  if (mu_dot.size() != slack_.mu.size())
    throw ContractViolation("advance_slack: mu_dot must have length k");
  const double cap = config_.slack_cap();
  for (std::size_t i = 0; i < mu_dot.size(); ++i)
    slack_.mu[i] = std::clamp(slack_.mu[i] + dt * mu_dot[i], -cap, cap);
}

}  // namespace safety_layer
