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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "safety_layer/airhockey.hpp"
#include "safety_layer/harness.hpp"
#include "safety_layer/safety_filter.hpp"
#include "test_support.hpp"

using namespace safety_layer;
using safety_layer::testing::Gen;
namespace fs = std::filesystem;

namespace {

bool all_ok = true;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  all_ok = all_ok && ok;
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

ExperimentConfig base_config(PolicyKind policy, bool safety, std::size_t episodes) {
  ExperimentConfig cfg;
  cfg.policy = policy;
  cfg.safety = safety;
  cfg.episodes = episodes;
  cfg.seed = 0;
  cfg.jobs = jobs();
  return cfg;
}

void safety_on_all_policies() {
  bool ok = true;
  std::string detail;
  for (auto kind : {PolicyKind::kScripted, PolicyKind::kRandom, PolicyKind::kAdversarial}) {
    const ExperimentConfig cfg = base_config(kind, true, 100);
    const ExperimentRun run = run_experiment_in_memory(cfg);
    std::size_t within = 0;
    double worst = 0.0;
    for (const auto& r : run.results) {
      within += r.max_violation <= 1e-3;
      worst = std::max(worst, r.max_violation);
    }
    ok = ok && within == cfg.episodes;
    detail += std::string(policy_kind_name(kind)) + " " + std::to_string(within) + "/100 (worst " +
              num(worst) + ") ";
  }
  report(1, "safety guarantee", ok, detail);
}

void unsafe_baseline() {
  const ExperimentRun run =
      run_experiment_in_memory(base_config(PolicyKind::kAdversarial, false, 100));
  std::size_t violating = 0;
  for (const auto& r : run.results) violating += r.max_violation > 0.01;
  report(2, "unsafe baseline", violating >= 90,
         std::to_string(violating) + "/100 episodes above 0.01");
}

void non_conservative() {
  const ExperimentRun off = run_experiment_in_memory(base_config(PolicyKind::kScripted, false, 200));
  const ExperimentRun on = run_experiment_in_memory(base_config(PolicyKind::kScripted, true, 200));
  const double a = on.summary.success_rate;
  const double b = off.summary.success_rate;
  report(3, "non-conservative", a >= b - 0.10,
         "success on " + num(a) + ", off " + num(b));
}

// s_dot = f + G u with constant f, G; g(s) = A s + b.
struct Instance {
  Vector f;
  Matrix g_ctrl;
  Matrix a;
  Vector b;
  Vector s;
};

SafetyFilter make_instance_filter(const Instance& inst, double bound, const FilterConfig& cfg) {
  const std::size_t m = inst.g_ctrl.cols();
  ControlAffineSystem sys(
      inst.f.size(), m, [f = inst.f](std::span<const double>) { return f; },
      [g = inst.g_ctrl](std::span<const double>) { return g; }, Vector(m, -bound),
      Vector(m, bound));
  std::vector<std::string> labels(inst.a.rows(), "row");
  ConstraintSet cs(inst.f.size(), labels, [a = inst.a, b = inst.b](std::span<const double> s) {
    Vector v = a * s;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += b[i];
    return ConstraintEvaluation{v, a};
  });
  return SafetyFilter(std::move(sys), std::move(cs), cfg);
}

void filter_numerics() {
  Gen gen(2024);
  double annihilation = 0.0, residual = 0.0, affinity = 0.0;
  std::size_t unclipped = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + gen.index(4);
    const std::size_t m = 1 + gen.index(4);
    const std::size_t k = 1 + gen.index(6);
    const Instance inst{gen.vector(n, -0.5, 0.5), gen.matrix(n, m), gen.matrix(k, n),
                        gen.vector(k, -2.0, -0.1), gen.vector(n, -0.2, 0.2)};
    const Vector mu = gen.vector(k, -2.0, 2.0);

    FilterConfig cfg;
    cfg.damping = 0.0;
    const Matrix jc = augmented_jacobian(inst.a, inst.g_ctrl, mu, cfg.slack_beta);
    const Vector w = tangent_weights(m, k, cfg.slack_weight);
    annihilation = std::max(annihilation, (jc * tangent_projector(jc, w, 0.0)).max_abs());

    // Closed loop: J_g s_dot + diag(sigma') mu_dot = -K_c c.
    SafetyFilter filter = make_instance_filter(inst, 1e6, cfg);
    filter.reset(inst.s);
    filter.set_slack({mu});
    const Vector ua = gen.vector(m, -3.0, 3.0);
    const Vector ub = gen.vector(m, -3.0, 3.0);
    const FilterOutput oa = filter.filter_action(inst.s, ua);
    if (!oa.diagnostics.correction_clipped) {
      ++unclipped;
      Vector sdot = inst.g_ctrl * std::span<const double>(oa.u_safe);
      for (std::size_t i = 0; i < n; ++i) sdot[i] += inst.f[i];
      const Vector jsdot = inst.a * std::span<const double>(sdot);
      const Vector sp = slack_map_derivative(mu, cfg.slack_beta);
      const Vector sg = slack_map(mu, cfg.slack_beta);
      const Vector g = inst.a * std::span<const double>(inst.s);
      for (std::size_t i = 0; i < k; ++i) {
        const double c = g[i] + inst.b[i] + sg[i];
        residual = std::max(residual,
                            std::abs(jsdot[i] + sp[i] * oa.mu_dot[i] + cfg.error_gain * c));
      }
    }

    // Affine in u_nom: f(t a + (1-t) b) = t f(a) + (1-t) f(b).
    const double t = gen.uniform(-1.0, 2.0);
    Vector mix(m);
    for (std::size_t i = 0; i < m; ++i) mix[i] = t * ua[i] + (1.0 - t) * ub[i];
    const FilterOutput ob = filter.filter_action(inst.s, ub);
    const FilterOutput om = filter.filter_action(inst.s, mix);
    if (oa.diagnostics.tangent_scale == 1.0 && ob.diagnostics.tangent_scale == 1.0 &&
        om.diagnostics.tangent_scale == 1.0) {
      for (std::size_t i = 0; i < m; ++i)
        affinity = std::max(affinity,
                            std::abs(om.u_safe[i] - (t * oa.u_safe[i] + (1.0 - t) * ob.u_safe[i])));
      for (std::size_t i = 0; i < k; ++i)
        affinity = std::max(
            affinity, std::abs(om.mu_dot[i] - (t * oa.mu_dot[i] + (1.0 - t) * ob.mu_dot[i])));
    }
  }
  const bool ok = annihilation <= 1e-9 && residual <= 1e-8 && affinity <= 1e-10 && unclipped > 0;
  report(4, "filter numerics", ok,
         "|Jc P| " + num(annihilation) + ", closed-loop " + num(residual) + " over " +
             std::to_string(unclipped) + " unclipped, affinity " + num(affinity));
}

void jacobian_oracles() {
  const ArmModel arm;
  const ConstraintSet cs = default_constraints(arm, TableGeometry{});
  Gen gen(77);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const JointVector q = gen.joints(3.1);
    const Vector qv = testing::to_vector(q);
    const Matrix ja = ee_jacobian(arm, q);
    const Matrix jf = finite_difference_jacobian(
        [&](std::span<const double> x) {
          const Vec2 p = forward_kinematics(arm, {x[0], x[1], x[2]}).ee();
          return Vector{p.x, p.y};
        },
        qv, 1e-6);
    worst = std::max(worst, (ja - jf).max_abs() / std::max(1.0, ja.max_abs()));
    const Matrix ca = cs.evaluate(qv).jacobian;
    const Matrix cf = finite_difference_jacobian(
        [&](std::span<const double> x) { return cs.evaluate(x).values; }, qv, 1e-6);
    worst = std::max(worst, (ca - cf).max_abs() / std::max(1.0, ca.max_abs()));
  }
  report(5, "jacobian oracles", worst <= 1e-5, "max relative error " + num(worst));
}

void worked_example() {
  const Instance inst{Vector(2, 0.0), Matrix::identity(2), Matrix{{1.0, 0.0}}, Vector{0.0},
                      Vector{-std::log(2.0), 0.0}};
  FilterConfig cfg;
  cfg.slack_beta = 1.0;
  cfg.slack_weight = 1.0;
  cfg.error_gain = 1.0;
  cfg.damping = 0.0;
  SafetyFilter filter = make_instance_filter(inst, 100.0, cfg);
  filter.reset(inst.s);
  const FilterOutput out = filter.filter_action(inst.s, Vector{1.0, 0.0});
  const double err = std::max({std::abs(out.u_safe[0] - 0.2), std::abs(out.u_safe[1]),
                               std::abs(out.mu_dot[0] + 0.4)});
  report(6, "worked example", err <= 1e-10,
         "u_safe (" + num(out.u_safe[0]) + ", " + num(out.u_safe[1]) + "), mu_dot " +
             num(out.mu_dot[0]) + ", error " + num(err));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "safety_layer_acceptance";
  fs::remove_all(root);
  ExperimentConfig cfg = base_config(PolicyKind::kRandom, true, 100);
  cfg.out_dir = (root / "a").string();
  run_experiment(cfg);
  cfg.out_dir = (root / "b").string();
  run_experiment(cfg);
  bool ok = true;
  for (const char* f : {"episodes.csv", "summary.json"}) {
    const std::string a = slurp(root / "a" / f);
    ok = ok && !a.empty() && a == slurp(root / "b" / f);
  }
  fs::remove_all(root);
  report(7, "determinism", ok, ok ? "episodes.csv and summary.json identical" : "outputs differ");
}

void performance() {
  const ArmModel arm;
  SafetyFilter filter(make_velocity_integrator(3, arm.qd_max),
                      default_constraints(arm, TableGeometry{}));
  Gen gen(5);
  std::vector<double> us;
  Vector q = testing::to_vector(default_home_configuration());
  filter.reset(q);
  double sink = 0.0;
  for (int i = 0; i < 3000; ++i) {
    const Vector u = gen.vector(3, -2.0, 2.0);
    const auto t0 = std::chrono::steady_clock::now();
    const FilterOutput out = filter.filter_action(q, u);
    const auto t1 = std::chrono::steady_clock::now();
    sink += out.u_safe[0];
    if (i >= 100) us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  std::nth_element(us.begin(), us.begin() + us.size() / 2, us.end());
  const double median = us[us.size() / 2];
  report(8, "performance", median < 1000.0 && std::isfinite(sink),
         "median filter_action " + num(median) + " us (k = 18)");
}

}  // namespace

int main() {
  const auto run = [](void (*fn)(), int id) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, "exception", false, e.what());
    }
  };
  run(safety_on_all_policies, 1);
  run(unsafe_baseline, 2);
  run(non_conservative, 3);
  run(filter_numerics, 4);
  run(jacobian_oracles, 5);
  run(worked_example, 6);
  run(determinism, 7);
  run(performance, 8);
  return all_ok ? 0 : 1;
}
