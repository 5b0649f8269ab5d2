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

// Deterministic planar air-hockey world: a velocity-controlled three-link arm
// whose end-effector carries the mallet, a damped puck with wall and mallet
// contacts, and a goal mouth centered on the right wall.
//
// Table frame: x in [0, length], y in [0, width]; the arm base sits just
// outside the left wall.

#ifndef SAFETY_LAYER_AIRHOCKEY_HPP_
#define SAFETY_LAYER_AIRHOCKEY_HPP_

#include <cstdint>
#include <random>
#include <utility>

#include "safety_layer/constraints.hpp"
#include "safety_layer/dynamics.hpp"

namespace safety_layer {

struct TableGeometry {
  double length = 2.0;
  double width = 1.0;
  double goal_center_y = 0.5;
  double goal_half_width = 0.125;
  double wall_restitution = 0.8;
  double puck_radius = 0.03;
  double mallet_radius = 0.05;
  double puck_damping = 0.3;    // 1/s
  double max_puck_speed = 5.0;  // m/s, guards against tunneling
  double link_clearance = 0.1;  // links may hover this far outside the walls

  void validate() const;
  Rect playing_field() const { return {0.0, length, 0.0, width}; }
  Vec2 goal_center() const { return {length, goal_center_y}; }
};

// Folded elbow-up pose with the mallet on the left quarter line, (0.5, 0.5)
// for the default arm, and the last link pointing at the goal.
JointVector default_home_configuration();

struct EpisodeConfig {
  double horizon = 5.0;  // s
  double dt = 0.02;      // s
  Rect puck_init_box{0.6, 1.0, 0.2, 0.8};
  double puck_speed_min = 0.0;
  double puck_speed_max = 0.3;
  std::uint64_t seed = 0;
  JointVector home_q = default_home_configuration();

  void validate() const;
  std::size_t max_steps() const;
};

struct WorldState {
  JointVector q{};
  JointVector qd{};
  Vec2 puck_p;
  Vec2 puck_v;
  double t = 0.0;
  std::mt19937_64 rng;
  bool goal_scored = false;  // latched

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct Observation {
  JointVector q{};
  JointVector qd{};
  Vec2 puck_p;
  Vec2 puck_v;
  Vec2 ee_p;
  Vec2 ee_v;
};

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng);

// Arm at home, puck drawn from the seed. Throws ConfigError when the home
// pose is not strictly inside every default constraint (g <= -0.01).
WorldState reset_episode(const EpisodeConfig& cfg, const ArmModel& arm, const TableGeometry& table);

WorldState step_world(const WorldState& world, const JointVector& u_joint, double dt,
                      const ArmModel& arm, const TableGeometry& table);

std::pair<Vec2, Vec2> puck_wall_collision(Vec2 puck_p, Vec2 puck_v, const TableGeometry& table);

// Kinematic (infinite-mass) mallet.
std::pair<Vec2, Vec2> mallet_puck_collision(Vec2 puck_p, Vec2 puck_v, Vec2 mallet_p, Vec2 mallet_v,
                                            double puck_radius, double mallet_radius);

bool check_success(const WorldState& world, const TableGeometry& table);

Observation observe(const WorldState& world, const ArmModel& arm);

// 18 rows over q: end-effector in the playing field shrunk by the mallet
// radius (4), link endpoints 1 and 2 in the field grown by link_clearance
// (8), joint position limits (6).
ConstraintSet default_constraints(const ArmModel& arm, const TableGeometry& table);

inline constexpr double kHomeClearance = 0.01;

}  // namespace safety_layer

#endif  // SAFETY_LAYER_AIRHOCKEY_HPP_
