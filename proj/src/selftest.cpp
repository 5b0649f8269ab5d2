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

// Quick invariant checks runnable from the CLI. The full suites live in
// tests/.

#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

#include "safety_layer/harness.hpp"
#include "safety_layer/kernels.hpp"
#include "safety_layer/wire_protocol.hpp"

namespace safety_layer {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = uniform(rng, -1.0, 1.0);
  return m;
}

std::string worked_example() {
  ControlAffineSystem sys(
      2, 2, [](std::span<const double>) { return Vector(2, 0.0); },
      [](std::span<const double>) { return Matrix::identity(2); }, Vector(2, -10.0),
      Vector(2, 10.0));
  ConstraintSet g(2, {"s1"}, [](std::span<const double> s) {
    return ConstraintEvaluation{{s[0]}, Matrix{{1.0, 0.0}}};
  });
  FilterConfig cfg;
  cfg.slack_beta = 1.0;
  cfg.slack_weight = 1.0;
  cfg.error_gain = 1.0;
  cfg.damping = 0.0;
  SafetyFilter filter(sys, g, cfg);
  const Vector s{-std::log(2.0), 0.0};
  filter.reset(s);
  const Vector u{1.0, 0.0};
  const FilterOutput out = filter.filter_action(s, u);
  const double err = std::max({std::abs(out.u_safe[0] - 0.2), std::abs(out.u_safe[1]),
                               std::abs(out.mu_dot[0] + 0.4)});
  if (err > 1e-10) return "error " + wire::format_double(err);
  return {};
}

std::string projector_annihilation() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + trial % 3;
    const Matrix jg = random_matrix(rng, k, 3);
    Vector mu(k);
    for (auto& v : mu) v = uniform(rng, -2.0, 2.0);
    const Matrix jc = augmented_jacobian(jg, Matrix::identity(3), mu, 3.0);
    const Vector w = tangent_weights(3, k, 100.0);
    const Matrix p = tangent_projector(jc, w, 0.0);
    worst = std::max(worst, (jc * p).max_abs());
  }
  if (worst > 1e-9) return "max |Jc P| = " + wire::format_double(worst);
  return {};
}

std::string slack_round_trip() {
  for (double beta : {1.0, 3.0}) {
    for (double mu = -5.0; mu <= 5.0; mu += 0.25) {
      const double back = slack_map_inverse(slack_map(mu, beta), beta);
      if (std::abs(back - mu) > 1e-9) return "mu=" + wire::format_double(mu);
    }
  }
  return {};
}

std::string jacobian_check() {
  const ArmModel arm;
  const TableGeometry table;
  const ConstraintSet cs = default_constraints(arm, table);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector q{uniform(rng, -2.5, 2.5), uniform(rng, -2.5, 2.5), uniform(rng, -2.5, 2.5)};
    const Matrix analytic = cs.evaluate(q).jacobian;
    const Matrix fd = finite_difference_jacobian(
        [&](std::span<const double> s) { return cs.evaluate(s).values; }, q, 1e-6);
    const double err = (analytic - fd).max_abs() / std::max(1.0, analytic.max_abs());
    if (err > 1e-5) return "relative error " + wire::format_double(err);
  }
  return {};
}

std::string kernel_equivalence() {
  const kernels::KernelTable* avx = kernels::avx2_table();
  if (avx == nullptr || !kernels::available(kernels::Backend::kAvx2)) return {};
  const kernels::KernelTable& ref = kernels::scalar_table();
  std::mt19937_64 rng(3);
  const Matrix a = random_matrix(rng, 18, 21);
  Vector w(21);
  for (auto& v : w) v = uniform(rng, 0.5, 100.0);
  Matrix g1(18, 18), g2(18, 18);
  ref.weighted_gram(a.values(), 18, 21, w, {g1.data(), 18 * 18});
  avx->weighted_gram(a.values(), 18, 21, w, {g2.data(), 18 * 18});
  const double err = (g1 - g2).max_abs() / g1.max_abs();
  if (err > 1e-13) return "weighted_gram mismatch " + wire::format_double(err);
  return {};
}

std::string wall_reflection() {
  // Puck heading into the bottom wall with the arm parked at home.
  const ArmModel arm;
  const TableGeometry table;
  WorldState w;
  w.q = default_home_configuration();
  w.puck_p = {1.5, table.puck_radius + 0.001};
  w.puck_v = {0.0, -1.0};
  const WorldState next = step_world(w, JointVector{}, 0.02, arm, table);
  if (!(next.puck_v.y > 0.0) || next.puck_p.y < table.puck_radius)
    return "puck not reflected";
  return {};
}

std::string wire_round_trip() {
  const wire::WireMessage m = wire::make_action(3, 17, Vec2{0.1, -1.0 / 3.0});
  const wire::WireMessage back = wire::decode_message(wire::encode_message(m));
  if (!(back == m)) return "decode(encode(m)) != m";
  return {};
}

std::string harness_determinism() {
  ExperimentConfig cfg;
  cfg.episodes = 3;
  cfg.seed = 5;
  const auto a = run_experiment_in_memory(cfg);
  const auto b = run_experiment_in_memory(cfg);
  if (a.results != b.results) return "episode results differ between runs";
  for (const auto& r : a.results)
    if (r.max_violation > cfg.filter.violation_tolerance)
      return "seed " + std::to_string(r.seed) + " violated by " +
             wire::format_double(r.max_violation);
  return {};
}

}  // namespace

bool run_selftest(std::ostream& out) {
  const std::pair<const char*, std::function<std::string()>> checks[] = {
      {"worked_example", worked_example},
      {"projector_annihilation", projector_annihilation},
      {"slack_round_trip", slack_round_trip},
      {"constraint_jacobians", jacobian_check},
      {"kernel_equivalence", kernel_equivalence},
      {"wall_reflection", wall_reflection},
      {"wire_round_trip", wire_round_trip},
      {"harness_determinism", harness_determinism},
  };
  bool ok = true;
  for (const auto& [name, fn] : checks) {
    std::string failure;
    try {
      failure = fn();
    } catch (const std::exception& e) {
      failure = std::string("threw: ") + e.what();
    }
    if (failure.empty()) {
      out << "ok   " << name << "\n";
    } else {
      out << "FAIL " << name << ": " << failure << "\n";
      ok = false;
    }
  }
  return ok;
}

}  // namespace safety_layer
