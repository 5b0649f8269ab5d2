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

// Experiment runner: policy -> IK -> (safety filter) -> joint velocity plant,
// with per-episode maximum constraint violation and goal success.

#ifndef SAFETY_LAYER_HARNESS_HPP_
#define SAFETY_LAYER_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safety_layer/airhockey.hpp"
#include "safety_layer/policies.hpp"
#include "safety_layer/safety_filter.hpp"

namespace safety_layer {

enum class PolicyKind { kScripted, kRandom, kAdversarial, kRemote };

std::string_view policy_kind_name(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view name);

struct ExperimentConfig {
  PolicyKind policy = PolicyKind::kScripted;
  std::string remote_address;  // for kRemote
  double remote_timeout = 1.0;  // s per action
  bool safety = true;
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
  double ik_damping = 0.05;
  std::string condition;  // report label; defaults to the policy name

  FilterConfig filter;
  EpisodeConfig world;  // dt, horizon and the puck distribution; seed unused
  TableGeometry table;
  ArmModel arm;
  PolicyParams policy_params;

  // Output options. Not part of the config hash.
  std::string out_dir = "out";
  bool write_trajectories = false;
  std::size_t jobs = 1;

  // Throws ConfigError.
  void validate() const;
  std::string condition_label() const;
};

// Strict: unknown keys and wrong types are ConfigErrors. Missing keys keep
// their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// FNV-1a 64 of the canonical JSON of every field that affects results, as 16
// hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct EpisodeResult {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  bool success = false;
  double max_violation = 0.0;
  std::size_t clipped_steps = 0;
  std::string protocol_error;  // empty when the episode ran to completion

  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

struct TrajectoryRecord {
  double t = 0.0;
  JointVector q{};
  JointVector qd{};
  Vec2 puck_p;
  Vec2 puck_v;
  JointVector u_nom{};
  JointVector u_safe{};
  double max_violation = 0.0;
  bool success_latched = false;
};

std::string trajectory_record_json(const TrajectoryRecord& r);

// Builds the constraint set, plant and filter the harness uses.
ConstraintSet make_constraints(const ExperimentConfig& cfg);
SafetyFilter make_filter(const ExperimentConfig& cfg);
std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg);

// Runs one episode from world0. `filter` null means safety off (joint
// velocities are only clamped to the speed limit). Remote protocol failures
// end the episode with a tag instead of throwing.
EpisodeResult run_episode(const ExperimentConfig& cfg, Policy& policy, const WorldState& world0,
                          std::uint64_t seed, SafetyFilter* filter,
                          std::vector<TrajectoryRecord>* log = nullptr);

struct ExperimentSummary {
  std::string condition;
  std::string policy;
  bool safety = true;
  std::size_t episodes = 0;
  double success_rate = 0.0;
  double mean_max_violation = 0.0;
  double p95_max_violation = 0.0;
  double violation_rate = 0.0;  // fraction with max_violation > violation_tolerance
  std::size_t protocol_errors = 0;
  std::string config_hash;
};

nlohmann::json summary_to_json(const ExperimentSummary& s);
ExperimentSummary summary_from_json(const nlohmann::json& j);

// Aggregates in seed order. p95 uses the nearest-rank definition.
ExperimentSummary summarize(const ExperimentConfig& cfg, const std::vector<EpisodeResult>& results);

struct ExperimentRun {
  std::vector<EpisodeResult> results;
  std::vector<std::vector<TrajectoryRecord>> trajectories;  // when requested
  ExperimentSummary summary;
};

// Episodes use seeds seed, seed+1, ...; runs up to cfg.jobs episodes in
// parallel and merges in seed order. No file output.
ExperimentRun run_experiment_in_memory(const ExperimentConfig& cfg, bool keep_trajectories = false);

// Same, then writes episodes.csv, summary.json, config.json and optionally
// traj-<seed>.jsonl into cfg.out_dir. The directory is checked for
// writability before any episode runs (IoError).
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

std::string episodes_csv(const std::vector<EpisodeResult>& results);

// Long-format CSV, header
// condition,safety,success_rate,mean_max_violation,p95_max_violation
std::string compare_report(const std::vector<ExperimentSummary>& summaries);

// Runs the invariant checks; prints one line per check.
bool run_selftest(std::ostream& out);

}  // namespace safety_layer

#endif  // SAFETY_LAYER_HARNESS_HPP_
