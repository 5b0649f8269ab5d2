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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "safety_layer/errors.hpp"
#include "safety_layer/harness.hpp"

using namespace safety_layer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ExperimentConfig small_config(PolicyKind kind = PolicyKind::kScripted) {
  ExperimentConfig cfg;
  cfg.policy = kind;
  cfg.episodes = 6;
  cfg.seed = 40;
  cfg.world.horizon = 2.0;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("safety_layer_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("policy names") {
  for (auto k : {PolicyKind::kScripted, PolicyKind::kRandom, PolicyKind::kAdversarial,
                 PolicyKind::kRemote})
    CHECK(parse_policy_kind(policy_kind_name(k)) == k);
  CHECK_FALSE(parse_policy_kind("expert").has_value());
}

TEST_CASE("episodes are deterministic and run in seed order") {
  for (auto kind : {PolicyKind::kScripted, PolicyKind::kRandom, PolicyKind::kAdversarial}) {
    const ExperimentConfig cfg = small_config(kind);
    const ExperimentRun a = run_experiment_in_memory(cfg);
    const ExperimentRun b = run_experiment_in_memory(cfg);
    CHECK(a.results == b.results);
    for (std::size_t i = 0; i < a.results.size(); ++i) CHECK(a.results[i].seed == cfg.seed + i);
  }
}

TEST_CASE("parallel runs match sequential runs") {
  ExperimentConfig cfg = small_config(PolicyKind::kRandom);
  cfg.episodes = 9;
  const ExperimentRun seq = run_experiment_in_memory(cfg);
  cfg.jobs = 4;
  const ExperimentRun par = run_experiment_in_memory(cfg);
  CHECK(seq.results == par.results);
  CHECK(summary_to_json(seq.summary) == summary_to_json(par.summary));
}

TEST_CASE("filter is called once per step") {
  const ExperimentConfig cfg = small_config(PolicyKind::kRandom);
  RandomPolicy policy(cfg.policy_params);
  SafetyFilter filter = make_filter(cfg);
  EpisodeConfig ep = cfg.world;
  ep.seed = 3;
  const WorldState w0 = reset_episode(ep, cfg.arm, cfg.table);
  const EpisodeResult r = run_episode(cfg, policy, w0, 3, &filter);
  CHECK(r.steps == cfg.world.max_steps());
  CHECK(filter.call_count() == r.steps);
}

TEST_CASE("idle policy leaves the arm parked") {
  const ExperimentConfig cfg = small_config();
  IdlePolicy idle;
  EpisodeConfig ep = cfg.world;
  ep.seed = 1;
  const WorldState w0 = reset_episode(ep, cfg.arm, cfg.table);
  const Vec2 ee0 = forward_kinematics(cfg.arm, w0.q).ee();
  for (bool safety : {false, true}) {
    CAPTURE(safety);
    SafetyFilter filter = make_filter(cfg);
    std::vector<TrajectoryRecord> log;
    const EpisodeResult r = run_episode(cfg, idle, w0, 1, safety ? &filter : nullptr, &log);
    CHECK(r.max_violation == 0.0);
    for (const auto& rec : log) {
      const Vec2 ee = forward_kinematics(cfg.arm, rec.q).ee();
      CHECK(std::abs(ee.x - ee0.x) <= 1e-6);
      CHECK(std::abs(ee.y - ee0.y) <= 1e-6);
    }
  }
}

TEST_CASE("trajectory log") {
  const ExperimentConfig cfg = small_config();
  const ExperimentRun run = run_experiment_in_memory(cfg, true);
  REQUIRE(run.trajectories.size() == cfg.episodes);
  for (std::size_t i = 0; i < cfg.episodes; ++i) {
    const auto& traj = run.trajectories[i];
    CHECK(traj.size() == run.results[i].steps);
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      CHECK(traj[k].t == doctest::Approx(cfg.world.dt * static_cast<double>(k + 1)));
      worst = std::max(worst, traj[k].max_violation);
    }
    CHECK(worst <= run.results[i].max_violation);
    if (!traj.empty()) CHECK(traj.back().success_latched == run.results[i].success);
  }
  const json rec = json::parse(trajectory_record_json(run.trajectories[0][0]));
  for (const char* key : {"t", "q", "qd", "puck_p", "puck_v", "u_nom", "u_safe", "max_violation",
                          "success_latched"})
    CHECK(rec.contains(key));
}

TEST_CASE("summary statistics") {
  ExperimentConfig cfg = small_config();
  cfg.filter.violation_tolerance = 1e-3;
  std::vector<EpisodeResult> rs(20);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    rs[i].seed = i;
    rs[i].max_violation = 1e-3 * static_cast<double>(i);  // 0 .. 0.019
    rs[i].success = i % 4 == 0;
  }
  rs[7].protocol_error = "timeout";
  const ExperimentSummary s = summarize(cfg, rs);
  CHECK(s.episodes == 20);
  CHECK(s.success_rate == doctest::Approx(0.25));
  CHECK(s.mean_max_violation == doctest::Approx(0.0095));
  CHECK(s.p95_max_violation == doctest::Approx(0.018));  // rank ceil(19) = 19
  CHECK(s.violation_rate == doctest::Approx(18.0 / 20.0));
  CHECK(s.protocol_errors == 1);
  CHECK(s.condition == "scripted");
  CHECK(s.config_hash == config_hash(cfg));
  CHECK(summary_to_json(summary_from_json(summary_to_json(s))) == summary_to_json(s));
}

TEST_CASE("episodes csv") {
  std::vector<EpisodeResult> rs(2);
  rs[0] = {5, 250, false, 0.0, 0, ""};
  rs[1] = {6, 31, true, 0.25, 2, "desync"};
  CHECK(episodes_csv(rs) ==
        "seed,steps,success,max_violation,clipped_steps,protocol_error\n"
        "5,250,0,0,0,\n"
        "6,31,1,0.25,2,desync\n");
}

TEST_CASE("compare report") {
  ExperimentSummary a;
  a.condition = "expert, tuned";
  a.safety = true;
  a.success_rate = 0.5;
  a.mean_max_violation = 0.0;
  a.p95_max_violation = 0.0;
  ExperimentSummary b = a;
  b.condition = "plain";
  b.safety = false;
  b.p95_max_violation = 0.125;
  CHECK(compare_report({a, b}) ==
        "condition,safety,success_rate,mean_max_violation,p95_max_violation\n"
        "\"expert, tuned\",on,0.5,0,0\n"
        "plain,off,0.5,0,0.125\n");
}

TEST_CASE("config parsing") {
  const json j = json::parse(R"({
    "policy": "adversarial", "safety": "off", "episodes": 7, "seed": 9,
    "filter": {"error_gain": 5.0, "slack_weight": 30.0},
    "table": {"puck_radius": 0.04},
    "policy_params": {"v_ee_max": 1.0}
  })");
  const ExperimentConfig cfg = config_from_json(j);
  CHECK(cfg.policy == PolicyKind::kAdversarial);
  CHECK_FALSE(cfg.safety);
  CHECK(cfg.episodes == 7);
  CHECK(cfg.seed == 9);
  CHECK(cfg.filter.error_gain == 5.0);
  CHECK(cfg.filter.slack_weight == 30.0);
  CHECK(cfg.table.puck_radius == 0.04);
  CHECK(cfg.policy_params.v_ee_max == 1.0);
  CHECK(config_to_json(config_from_json(config_to_json(cfg))) == config_to_json(cfg));

  const ExperimentConfig remote = config_from_json(json{{"policy", "remote:tcp:localhost:9000"}});
  CHECK(remote.policy == PolicyKind::kRemote);
  CHECK(remote.remote_address == "tcp:localhost:9000");
  CHECK(config_from_json(json{{"safety", false}}).safety == false);
}

TEST_CASE("config errors") {
  const char* bad[] = {
      R"({"polcy": "scripted"})",
      R"({"filter": {"gain": 1}})",
      R"({"safety": "maybe"})",
      R"({"safety": 1})",
      R"({"episodes": 0})",
      R"({"episodes": 2.5})",
      R"({"seed": -1})",
      R"({"policy": "expert"})",
      R"({"policy": "remote"})",
      R"({"dt": "fast"})",
      R"({"filter": {"slack_beta": 0}})",
      R"({"filter": {"error_gain_per_row": [1, 2]}})",
      R"({"arm": {"link_lengths": [1, 2]}})",
      R"({"world": {"home_q": [2.95, 0, 0]}})",
      R"({"jobs": 0})",
      R"([1, 2])",
  };
  for (const char* text : bad) {
    const std::string shown = text;
    CAPTURE(shown);
    CHECK_THROWS_AS(config_from_json(json::parse(text)), ConfigError);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), std::exception);
}

TEST_CASE("config hash covers results only") {
  const ExperimentConfig base = small_config();
  ExperimentConfig cfg = base;
  cfg.out_dir = "elsewhere";
  cfg.jobs = 8;
  cfg.write_trajectories = true;
  CHECK(config_hash(cfg) == config_hash(base));
  CHECK(config_hash(base).size() == 16);
  cfg.filter.error_gain = 11.0;
  CHECK(config_hash(cfg) != config_hash(base));
  cfg = base;
  cfg.seed += 1;
  CHECK(config_hash(cfg) != config_hash(base));
}

TEST_CASE("run_experiment writes its files") {
  ExperimentConfig cfg = small_config();
  cfg.episodes = 3;
  cfg.write_trajectories = true;
  cfg.out_dir = fresh_dir("files").string();
  const ExperimentSummary s = run_experiment(cfg);
  const fs::path dir(cfg.out_dir);
  const std::string csv = slurp(dir / "episodes.csv");
  CHECK(csv.starts_with("seed,steps,success,max_violation,clipped_steps,protocol_error\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary == summary_to_json(s));
  const json config = json::parse(slurp(dir / "config.json"));
  CHECK(config.at("config_hash") == s.config_hash);
  for (std::uint64_t seed = cfg.seed; seed < cfg.seed + 3; ++seed) {
    const fs::path traj = dir / ("traj-" + std::to_string(seed) + ".jsonl");
    REQUIRE(fs::exists(traj));
    std::ifstream in(traj);
    std::string line;
    while (std::getline(in, line)) CHECK_NOTHROW(json::parse(line));
  }
  fs::remove_all(dir);
}

TEST_CASE("unwritable output directory") {
  const fs::path blocker = fresh_dir("blocker");
  std::ofstream(blocker) << "file, not a directory";
  ExperimentConfig cfg = small_config();
  cfg.out_dir = (blocker / "sub").string();
  CHECK_THROWS_AS(run_experiment(cfg), IoError);
  fs::remove(blocker);
}
