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

#include "safety_layer/policies.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "safety_layer/errors.hpp"

namespace safety_layer {
namespace {

// Keeps the random policy's stream apart from the world's puck stream, which
// is seeded with the same episode seed.
constexpr std::uint64_t kRandomPolicyStream = 0x9E3779B97F4A7C15ULL;

}  // namespace

void PolicyParams::validate() const {
  if (!(v_ee_max > 0.0)) throw ContractViolation("PolicyParams: v_ee_max must be > 0");
  if (!(approach_offset >= 0.0)) throw ContractViolation("PolicyParams: approach_offset must be >= 0");
  if (!(pos_tol > 0.0)) throw ContractViolation("PolicyParams: pos_tol must be > 0");
  if (!(strike_speed > 0.0)) throw ContractViolation("PolicyParams: strike_speed must be > 0");
  if (!(approach_gain > 0.0)) throw ContractViolation("PolicyParams: approach_gain must be > 0");
}

Vec2 clamp_ee_velocity(Vec2 v, double bound) {
  const double peak = std::max(std::abs(v.x), std::abs(v.y));
  if (!(peak > bound)) return v;
  return v * (bound / peak);
}

Vec2 scripted_expert_action(const Observation& obs, const TableGeometry& table,
                            const PolicyParams& params) {
  const Vec2 to_goal = table.goal_center() - obs.puck_p;
  const double dist_goal = to_goal.norm();
  const Vec2 aim = dist_goal > 0.0 ? to_goal * (1.0 / dist_goal) : Vec2{1.0, 0.0};
  const Vec2 normal{-aim.y, aim.x};
  const double contact = table.mallet_radius + table.puck_radius;
  const double standoff = contact + params.approach_offset;
  const Vec2 hit_point = obs.puck_p - aim * standoff;

  const Vec2 rel = obs.puck_p - obs.ee_p;
  const double along = rel.dot(aim);
  const double lateral = rel.dot(normal);  // signed offset of the puck from the EE's aim line
  const bool in_corridor = std::abs(lateral) <= params.pos_tol && along > 0.0 &&
                           along <= standoff + params.pos_tol;
  if (in_corridor || (obs.ee_p - hit_point).norm() <= params.pos_tol) {
    // Strike, steering back onto the line through puck and goal.
    return clamp_ee_velocity(aim * params.strike_speed + normal * (params.approach_gain * lateral),
                             params.v_ee_max);
  }

  // Behind-the-puck waypoint; detour sideways while the EE is on the goal side.
  Vec2 target = hit_point;
  if (along < params.approach_offset && std::abs(lateral) < contact + params.approach_offset) {
    const double side = lateral > 0.0 ? -1.0 : 1.0;
    target = obs.puck_p + normal * (side * (contact + 2.0 * params.approach_offset));
  }
  return clamp_ee_velocity((target - obs.ee_p) * params.approach_gain + obs.puck_v,
                           params.v_ee_max);
}

Vec2 random_policy_action(std::mt19937_64& rng, const PolicyParams& params) {
  const double x = (2.0 * uniform01(rng) - 1.0) * params.v_ee_max;
  const double y = (2.0 * uniform01(rng) - 1.0) * params.v_ee_max;
  return {x, y};
}

Vec2 adversarial_policy_action(const Observation& obs, const TableGeometry& table,
                               const PolicyParams& params) {
  const std::pair<double, Vec2> walls[] = {
      {table.width - obs.ee_p.y, {0.0, 1.0}},
      {obs.ee_p.y, {0.0, -1.0}},
      {table.length - obs.ee_p.x, {1.0, 0.0}},
      {obs.ee_p.x, {-1.0, 0.0}},
  };
  const auto* nearest = &walls[0];
  for (const auto& w : walls)
    if (w.first < nearest->first) nearest = &w;
  return nearest->second * params.v_ee_max;
}

ScriptedExpertPolicy::ScriptedExpertPolicy(TableGeometry table, PolicyParams params)
    : table_(std::move(table)), params_(std::move(params)) {
  params_.validate();
}

Vec2 ScriptedExpertPolicy::act(const Observation& obs) {
  return scripted_expert_action(obs, table_, params_);
}

RandomPolicy::RandomPolicy(PolicyParams params) : params_(std::move(params)) {
  params_.validate();
}

void RandomPolicy::reset(std::uint64_t seed) { rng_.seed(seed ^ kRandomPolicyStream); }

Vec2 RandomPolicy::act(const Observation&) { return random_policy_action(rng_, params_); }

AdversarialPolicy::AdversarialPolicy(TableGeometry table, PolicyParams params)
    : table_(std::move(table)), params_(std::move(params)) {
  params_.validate();
}

Vec2 AdversarialPolicy::act(const Observation& obs) {
  return adversarial_policy_action(obs, table_, params_);
}

}  // namespace safety_layer
