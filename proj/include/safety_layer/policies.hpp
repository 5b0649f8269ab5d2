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

// Policies emit desired end-effector velocities in the table plane. The
// harness converts them to joint velocities (IK) and, when enabled, passes
// them through the safety filter.

#ifndef SAFETY_LAYER_POLICIES_HPP_
#define SAFETY_LAYER_POLICIES_HPP_

#include <cstdint>
#include <random>
#include <string_view>

#include "safety_layer/airhockey.hpp"

namespace safety_layer {

struct PolicyParams {
  double v_ee_max = 1.5;          // m/s, per component
  double approach_offset = 0.03;  // m behind the contact distance
  double pos_tol = 0.005;         // m
  double strike_speed = 0.8;      // m/s
  double approach_gain = 8.0;     // 1/s

  void validate() const;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(std::uint64_t seed) = 0;
  virtual Vec2 act(const Observation& obs) = 0;
  // Bound on |v_ee|_inf the harness enforces on the output.
  virtual double v_ee_max() const = 0;
  virtual std::string_view name() const = 0;
};

// Scales v so that |v|_inf <= bound, keeping its direction.
Vec2 clamp_ee_velocity(Vec2 v, double bound);

// Two-phase hitting law. The hit point sits behind the puck on the line from
// the goal center through the puck, d = r_mallet + r_puck + approach_offset
// away. Outside the strike corridor the end-effector is driven proportionally
// to the hit point; inside it (within pos_tol of that line, between the hit
// point and the puck) it drives through the puck at strike_speed.
Vec2 scripted_expert_action(const Observation& obs, const TableGeometry& table,
                            const PolicyParams& params);

// Each component uniform in [-v_ee_max, v_ee_max].
Vec2 random_policy_action(std::mt19937_64& rng, const PolicyParams& params);

// Full speed toward the closest wall of the playing field. Ties resolve in
// the order +y, -y, +x, -x.
Vec2 adversarial_policy_action(const Observation& obs, const TableGeometry& table,
                               const PolicyParams& params);

class ScriptedExpertPolicy final : public Policy {
 public:
  ScriptedExpertPolicy(TableGeometry table, PolicyParams params);
  void reset(std::uint64_t) override {}
  Vec2 act(const Observation& obs) override;
  double v_ee_max() const override { return params_.v_ee_max; }
  std::string_view name() const override { return "scripted"; }

 private:
  TableGeometry table_;
  PolicyParams params_;
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(PolicyParams params);
  void reset(std::uint64_t seed) override;
  Vec2 act(const Observation& obs) override;
  double v_ee_max() const override { return params_.v_ee_max; }
  std::string_view name() const override { return "random"; }

 private:
  PolicyParams params_;
  std::mt19937_64 rng_;
};

class AdversarialPolicy final : public Policy {
 public:
  AdversarialPolicy(TableGeometry table, PolicyParams params);
  void reset(std::uint64_t) override {}
  Vec2 act(const Observation& obs) override;
  double v_ee_max() const override { return params_.v_ee_max; }
  std::string_view name() const override { return "adversarial"; }

 private:
  TableGeometry table_;
  PolicyParams params_;
};

// Always commands zero velocity.
class IdlePolicy final : public Policy {
 public:
  explicit IdlePolicy(double v_ee_max = 1.5) : v_ee_max_(v_ee_max) {}
  void reset(std::uint64_t) override {}
  Vec2 act(const Observation&) override { return {}; }
  double v_ee_max() const override { return v_ee_max_; }
  std::string_view name() const override { return "idle"; }

 private:
  double v_ee_max_;
};

}  // namespace safety_layer

#endif  // SAFETY_LAYER_POLICIES_HPP_
