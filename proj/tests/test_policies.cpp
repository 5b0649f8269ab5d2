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

#include <doctest.h>

#include <cmath>

#include "safety_layer/policies.hpp"
#include "test_support.hpp"

using namespace safety_layer;
using safety_layer::testing::Gen;

namespace {

Observation obs_at(Vec2 ee, Vec2 puck) {
  Observation o;
  o.ee_p = ee;
  o.puck_p = puck;
  return o;
}

}  // namespace

TEST_CASE("clamp keeps direction") {
  const Vec2 v = clamp_ee_velocity({3.0, -1.5}, 1.5);
  CHECK(v.x == doctest::Approx(1.5));
  CHECK(v.y == doctest::Approx(-0.75));
  CHECK(clamp_ee_velocity({0.2, 0.1}, 1.5) == Vec2{0.2, 0.1});
}

TEST_CASE("expert heads for the goal when collinear") {
  const TableGeometry table;
  const PolicyParams params;
  const Vec2 v = scripted_expert_action(obs_at({0.5, 0.5}, {1.0, 0.5}), table, params);
  CHECK(v.x > 0.0);
  CHECK(std::abs(v.y) < 1e-12);
}

TEST_CASE("expert at the hit point strikes along the aim line") {
  const TableGeometry table;
  const PolicyParams params;
  Gen gen(51);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 puck{gen.uniform(0.6, 1.0), gen.uniform(0.2, 0.8)};
    const Vec2 to_goal = table.goal_center() - puck;
    const Vec2 aim = to_goal * (1.0 / to_goal.norm());
    const double d = table.mallet_radius + table.puck_radius + params.approach_offset;
    const Vec2 v = scripted_expert_action(obs_at(puck - aim * d, puck), table, params);
    CHECK(std::abs(v.x - params.strike_speed * aim.x) <= 1e-9);
    CHECK(std::abs(v.y - params.strike_speed * aim.y) <= 1e-9);
  }
}

TEST_CASE("expert output is bounded") {
  const TableGeometry table;
  const PolicyParams params;
  Gen gen(52);
  for (int trial = 0; trial < 1000; ++trial) {
    Observation o = obs_at({gen.uniform(0.0, 2.0), gen.uniform(0.0, 1.0)},
                           {gen.uniform(0.0, 2.0), gen.uniform(0.0, 1.0)});
    o.puck_v = {gen.uniform(-3.0, 3.0), gen.uniform(-3.0, 3.0)};
    const Vec2 v = scripted_expert_action(o, table, params);
    CHECK(std::abs(v.x) <= params.v_ee_max + 1e-12);
    CHECK(std::abs(v.y) <= params.v_ee_max + 1e-12);
  }
}

TEST_CASE("random policy") {
  PolicyParams params;
  RandomPolicy a(params), b(params);
  a.reset(3);
  b.reset(3);
  const Observation o;
  for (int i = 0; i < 100; ++i) CHECK(a.act(o) == b.act(o));

  std::mt19937_64 rng(4);
  double sx = 0.0, sy = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vec2 v = random_policy_action(rng, params);
    CHECK(std::abs(v.x) <= params.v_ee_max);
    CHECK(std::abs(v.y) <= params.v_ee_max);
    sx += v.x;
    sy += v.y;
  }
  // Mean of U(-a, a) has standard error a / sqrt(3 n).
  const double se = params.v_ee_max / std::sqrt(3.0 * n);
  CHECK(std::abs(sx / n) <= 3.0 * se);
  CHECK(std::abs(sy / n) <= 3.0 * se);
}

TEST_CASE("adversarial policy pushes toward the nearest wall") {
  const TableGeometry table;
  const PolicyParams params;
  CHECK(adversarial_policy_action(obs_at({1.0, 0.9}, {}), table, params) == Vec2{0.0, 1.5});
  CHECK(adversarial_policy_action(obs_at({1.0, 0.1}, {}), table, params) == Vec2{0.0, -1.5});
  CHECK(adversarial_policy_action(obs_at({0.05, 0.5}, {}), table, params) == Vec2{-1.5, 0.0});
  CHECK(adversarial_policy_action(obs_at({1.95, 0.5}, {}), table, params) == Vec2{1.5, 0.0});
  // Tie between top and bottom resolves to +y.
  CHECK(adversarial_policy_action(obs_at({1.0, 0.5}, {}), table, params) == Vec2{0.0, 1.5});
}

TEST_CASE("params validation") {
  PolicyParams p;
  CHECK_NOTHROW(p.validate());
  p.v_ee_max = 0.0;
  CHECK_THROWS(p.validate());
  p = {};
  p.pos_tol = -1.0;
  CHECK_THROWS(p.validate());
}
