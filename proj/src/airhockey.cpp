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

#include "safety_layer/airhockey.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <tuple>

#include "safety_layer/errors.hpp"

namespace safety_layer {

void TableGeometry::validate() const {
  if (!(length > 0.0) || !(width > 0.0)) throw ContractViolation("TableGeometry: non-positive size");
  if (!(goal_half_width > 0.0) || goal_center_y - goal_half_width < 0.0 ||
      goal_center_y + goal_half_width > width)
    throw ContractViolation("TableGeometry: goal span must lie within the table width");
  if (!(puck_radius > 0.0) || !(mallet_radius > 0.0))
    throw ContractViolation("TableGeometry: radii must be positive");
  if (!(wall_restitution > 0.0) || wall_restitution > 1.0)
    throw ContractViolation("TableGeometry: restitution must be in (0, 1]");
  if (!(puck_damping >= 0.0)) throw ContractViolation("TableGeometry: damping must be >= 0");
  if (!(max_puck_speed > 0.0)) throw ContractViolation("TableGeometry: max_puck_speed must be > 0");
  if (!(link_clearance >= 0.0)) throw ContractViolation("TableGeometry: link_clearance must be >= 0");
}

JointVector default_home_configuration() {
  const double shoulder = std::atan2(4.0, 3.0);
  return {shoulder, -std::numbers::pi / 2.0 - shoulder, std::numbers::pi / 2.0};
}

void EpisodeConfig::validate() const {
  if (!(horizon > 0.0)) throw ContractViolation("EpisodeConfig: horizon must be > 0");
  if (!(dt > 0.0)) throw ContractViolation("EpisodeConfig: dt must be > 0");
  if (!(puck_init_box.x_lo <= puck_init_box.x_hi) || !(puck_init_box.y_lo <= puck_init_box.y_hi))
    throw ContractViolation("EpisodeConfig: puck_init_box is inverted");
  if (!(puck_speed_min >= 0.0) || !(puck_speed_min <= puck_speed_max))
    throw ContractViolation("EpisodeConfig: invalid puck speed range");
}

std::size_t EpisodeConfig::max_steps() const {
  return static_cast<std::size_t>(std::llround(std::ceil(horizon / dt - 1e-9)));
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

WorldState reset_episode(const EpisodeConfig& cfg, const ArmModel& arm, const TableGeometry& table) {
  cfg.validate();
  arm.validate();
  table.validate();

  const ConstraintSet g = default_constraints(arm, table);
  const ConstraintEvaluation home = g.evaluate(cfg.home_q);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (home.values[i] > -kHomeClearance) {
      throw ConfigError("home configuration is not strictly safe: constraint '" + g.labels()[i] +
                        "' = " + std::to_string(home.values[i]));
    }
  }

  WorldState w;
  w.q = cfg.home_q;
  w.qd = {0.0, 0.0, 0.0};
  w.rng.seed(cfg.seed);
  const Rect& box = cfg.puck_init_box;
  const double px = box.x_lo + (box.x_hi - box.x_lo) * uniform01(w.rng);
  const double py = box.y_lo + (box.y_hi - box.y_lo) * uniform01(w.rng);
  const double heading = 2.0 * std::numbers::pi * uniform01(w.rng);
  const double speed =
      cfg.puck_speed_min + (cfg.puck_speed_max - cfg.puck_speed_min) * uniform01(w.rng);
  w.puck_p = {px, py};
  w.puck_v = {speed * std::cos(heading), speed * std::sin(heading)};
  w.t = 0.0;
  w.goal_scored = false;
  return w;
}

std::pair<Vec2, Vec2> puck_wall_collision(Vec2 p, Vec2 v, const TableGeometry& table) {
  const double r = table.puck_radius;
  const double e = table.wall_restitution;

  if (p.x - r < 0.0) {
    p.x = 2.0 * r - p.x;
    if (v.x < 0.0) v.x = -e * v.x;
  }
  const bool in_mouth = std::abs(p.y - table.goal_center_y) <= table.goal_half_width;
  if (!in_mouth && p.x + r > table.length) {
    p.x = 2.0 * (table.length - r) - p.x;
    if (v.x > 0.0) v.x = -e * v.x;
  }
  if (p.y - r < 0.0) {
    p.y = 2.0 * r - p.y;
    if (v.y < 0.0) v.y = -e * v.y;
  }
  if (p.y + r > table.width) {
    p.y = 2.0 * (table.width - r) - p.y;
    if (v.y > 0.0) v.y = -e * v.y;
  }
  return {p, v};
}

std::pair<Vec2, Vec2> mallet_puck_collision(Vec2 p, Vec2 v, Vec2 mallet_p, Vec2 mallet_v,
                                            double puck_radius, double mallet_radius) {
  const double contact = puck_radius + mallet_radius;
  const Vec2 d = p - mallet_p;
  const double dist = d.norm();
  if (!(dist < contact)) return {p, v};

  // Concentric: push along +x.
  const Vec2 n = dist > 0.0 ? d * (1.0 / dist) : Vec2{1.0, 0.0};
  p = mallet_p + n * contact;
  const double approach = (v - mallet_v).dot(n);
  if (approach < 0.0) v = v - n * (2.0 * approach);
  return {p, v};
}

WorldState step_world(const WorldState& world, const JointVector& u_joint, double dt,
                      const ArmModel& arm, const TableGeometry& table) {
  if (!(dt > 0.0)) throw ContractViolation("step_world: dt must be positive");
  WorldState next = world;
  for (std::size_t i = 0; i < 3; ++i) {
    next.q[i] = world.q[i] + dt * u_joint[i];
    next.qd[i] = u_joint[i];
  }

  const Vec2 mallet_p = forward_kinematics(arm, next.q).ee();
  const Matrix jac = ee_jacobian(arm, next.q);
  const Vec2 mallet_v{jac(0, 0) * u_joint[0] + jac(0, 1) * u_joint[1] + jac(0, 2) * u_joint[2],
                      jac(1, 0) * u_joint[0] + jac(1, 1) * u_joint[1] + jac(1, 2) * u_joint[2]};

  // Exact solution of v_dot = -d v over the step.
  const double d = table.puck_damping;
  const double decay = std::exp(-d * dt);
  const double travel = d > 0.0 ? -std::expm1(-d * dt) / d : dt;
  Vec2 p = world.puck_p + world.puck_v * travel;
  Vec2 v = world.puck_v * decay;

  std::tie(p, v) = mallet_puck_collision(p, v, mallet_p, mallet_v, table.puck_radius,
                                         table.mallet_radius);
  std::tie(p, v) = puck_wall_collision(p, v, table);

  const double speed = v.norm();
  if (speed > table.max_puck_speed) v = v * (table.max_puck_speed / speed);

  next.puck_p = p;
  next.puck_v = v;
  next.t = world.t + dt;
  next.goal_scored = world.goal_scored || check_success(next, table);
  return next;
}

bool check_success(const WorldState& world, const TableGeometry& table) {
  if (world.goal_scored) return true;
  return world.puck_p.x >= table.length &&
         std::abs(world.puck_p.y - table.goal_center_y) <= table.goal_half_width;
}

Observation observe(const WorldState& world, const ArmModel& arm) {
  Observation obs;
  obs.q = world.q;
  obs.qd = world.qd;
  obs.puck_p = world.puck_p;
  obs.puck_v = world.puck_v;
  obs.ee_p = forward_kinematics(arm, world.q).ee();
  const Matrix jac = ee_jacobian(arm, world.q);
  obs.ee_v = {jac(0, 0) * world.qd[0] + jac(0, 1) * world.qd[1] + jac(0, 2) * world.qd[2],
              jac(1, 0) * world.qd[0] + jac(1, 1) * world.qd[1] + jac(1, 2) * world.qd[2]};
  return obs;
}

namespace {

PointMap arm_point_map(const ArmModel& arm, std::size_t index) {
  return [arm, index](std::span<const double> s) {
    const JointVector q{s[0], s[1], s[2]};
    return PointWithJacobian{forward_kinematics(arm, q).points[index],
                             point_jacobian(arm, q, index)};
  };
}

}  // namespace

ConstraintSet default_constraints(const ArmModel& arm, const TableGeometry& table) {
  const Rect field = table.playing_field();
  const double grow = -table.link_clearance;
  const std::size_t joints[] = {0, 1, 2};
  return ConstraintSet::stack({
      point_in_rectangle_constraints(3, arm_point_map(arm, 3), field, table.mallet_radius, "ee"),
      point_in_rectangle_constraints(3, arm_point_map(arm, 1), field, grow, "link1"),
      point_in_rectangle_constraints(3, arm_point_map(arm, 2), field, grow, "link2"),
      box_constraints(arm.q_min, arm.q_max, joints, "joint"),
  });
}

}  // namespace safety_layer
