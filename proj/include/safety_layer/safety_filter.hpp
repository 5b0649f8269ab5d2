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

// Safety filter acting on the tangent space of a constraint manifold.
//
// Each inequality g_i(s) <= 0 is turned into an equality with a slack
// coordinate mu_i,
//
//     c(s, mu) = g(s) + sigma(mu) = 0,      sigma(mu) = softplus_beta(mu) > 0,
//
// so that any point on the manifold c = 0 is strictly safe. The augmented
// system (s, mu) is driven by v = [u; mu_dot] and c evolves as
//
//     c_dot = J_g f(s) + J_c v,             J_c = [J_g G(s) | diag(sigma'(mu))].
//
// A nominal action u_nom is embedded as [u_nom; 0], projected onto the
// null space of J_c (W-weighted, W = diag(1_m, w_mu 1_k)), and a correction
// term is added so that c_dot = -K_c c:
//
//     v = -J_c^+ (J_g f + K_c c) + alpha (I - J_c^+ J_c) [u_nom; 0].
//
// alpha in [0, 1] shrinks only the tangent part to respect the control
// bounds; the correction part is clipped only as a last resort.

#ifndef SAFETY_LAYER_SAFETY_FILTER_HPP_
#define SAFETY_LAYER_SAFETY_FILTER_HPP_

#include <cstddef>
#include <span>

#include "safety_layer/constraints.hpp"
#include "safety_layer/dynamics.hpp"
#include "safety_layer/errors.hpp"
#include "safety_layer/linalg.hpp"

namespace safety_layer {

struct FilterConfig {
  double error_gain = 10.0;        // K_c [1/s]
  Vector error_gain_per_row;       // optional per-constraint K_c; overrides error_gain
  double slack_beta = 3.0;         // softplus sharpness
  double slack_weight = 20.0;      // w_mu >= 1
  double damping = 1e-6;           // lambda of the weighted pseudoinverse
  double slack_floor = 1e-4;       // epsilon_sigma, smallest sigma used at reset
  double violation_tolerance = 1e-3;

  // Throws ContractViolation when a positivity requirement is broken.
  void validate() const;
  double slack_cap() const { return 50.0 / slack_beta; }
};

struct SlackState {
  Vector mu;
};

struct FilterDiagnostics {
  double c_norm = 0.0;              // ||c||_2
  double projector_residual = 0.0;  // max |J_c P|
  bool correction_clipped = false;
  double tangent_scale = 1.0;       // alpha
  bool rank_ok = true;
};

struct FilterOutput {
  Vector u_safe;  // m
  Vector mu_dot;  // k
  FilterDiagnostics diagnostics;
};

// NumericError raised from filter_action, with the diagnostics gathered up
// to the failure point.
class FilterNumericError : public NumericError {
 public:
  FilterNumericError(const std::string& what, FilterDiagnostics diag)
      : NumericError(what), diagnostics_(diag) {}
  const FilterDiagnostics& diagnostics() const noexcept { return diagnostics_; }

 private:
  FilterDiagnostics diagnostics_;
};

// sigma(mu) = ln(1 + exp(beta mu)) / beta, evaluated without overflow.
double slack_map(double mu, double beta);
// sigma'(mu) = 1 / (1 + exp(-beta mu)), in (0, 1).
double slack_map_derivative(double mu, double beta);
// sigma^-1(y) = ln(exp(beta y) - 1) / beta for y > 0.
double slack_map_inverse(double y, double beta);

Vector slack_map(std::span<const double> mu, double beta);
Vector slack_map_derivative(std::span<const double> mu, double beta);

// mu_i = sigma^-1(max(-g_i, slack_floor)), clamped to +-50/beta. Unsafe rows
// get the floor, leaving a positive residual c_i that the correction term
// drives to zero.
SlackState initialize_slack(std::span<const double> g_values, double beta, double slack_floor);

// J_c = [J_g G | diag(sigma'(mu))], k x (m + k).
Matrix augmented_jacobian(const Matrix& constraint_jacobian, const Matrix& control_matrix,
                          std::span<const double> mu, double beta);

// Diagonal weights [1 (m times), slack_weight (k times)].
Vector tangent_weights(std::size_t m, std::size_t k, double slack_weight);

// W J^T (J W J^T + lambda^2 I)^-1 with W = diag(weights). Throws
// SingularityError if the inner matrix cannot be factored.
Matrix weighted_pseudoinverse(const Matrix& jacobian, std::span<const double> weights,
                              double lambda);

// I - J^+_W J.
Matrix tangent_projector(const Matrix& jacobian, std::span<const double> weights, double lambda);

class SafetyFilter {
 public:
  SafetyFilter(ControlAffineSystem system, ConstraintSet constraints, FilterConfig config = {});

  // Re-initializes the slack on the manifold through s and clears the
  // diagnostics.
  void reset(std::span<const double> s);

  // Maps u_nom to a safe control. Requires reset() for the current episode.
  FilterOutput filter_action(std::span<const double> s, std::span<const double> u_nom);

  // mu += dt * mu_dot, clamped to +-50/beta.
  void advance_slack(std::span<const double> mu_dot, double dt);

  const SlackState& slack() const noexcept { return slack_; }
  void set_slack(SlackState slack);
  const FilterDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  std::size_t call_count() const noexcept { return calls_; }

  const ControlAffineSystem& system() const noexcept { return system_; }
  const ConstraintSet& constraints() const noexcept { return constraints_; }
  const FilterConfig& config() const noexcept { return config_; }

 private:
  ControlAffineSystem system_;
  ConstraintSet constraints_;
  FilterConfig config_;
  SlackState slack_;
  FilterDiagnostics diagnostics_;
  bool initialized_ = false;
  std::size_t calls_ = 0;
};

}  // namespace safety_layer

#endif  // SAFETY_LAYER_SAFETY_FILTER_HPP_
