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

#include "safety_layer/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "safety_layer/errors.hpp"
#include "safety_layer/remote_policy.hpp"
#include "safety_layer/wire_protocol.hpp"

namespace safety_layer {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Reads an object field by field and rejects keys nobody asked for.
class StrictReader {
 public:
  StrictReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& dst) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      dst = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where() + "." + key + ": " + e.what());
    }
  }

  template <std::size_t N>
  void read_array(const char* key, std::array<double, N>& dst) {
    std::vector<double> v(dst.begin(), dst.end());
    read(key, v);
    if (v.size() != N)
      throw ConfigError(where() + "." + key + " must have " + std::to_string(N) + " entries");
    std::copy(v.begin(), v.end(), dst.begin());
  }

  void read_vec2(const char* key, Vec2& dst) {
    std::array<double, 2> a{dst.x, dst.y};
    read_array(key, a);
    dst = {a[0], a[1]};
  }

  void read_rect(const char* key, Rect& dst) {
    std::array<double, 4> a{dst.x_lo, dst.x_hi, dst.y_lo, dst.y_hi};
    read_array(key, a);
    dst = {a[0], a[1], a[2], a[3]};
  }

  const json* child(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string sub(const char* key) const { return where() + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!used_.contains(key)) throw ConfigError("unknown config key " + where() + "." + key);
  }

 private:
  std::string where() const { return path_.empty() ? "<config>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json filter_json(const FilterConfig& f) {
  return {{"error_gain", f.error_gain},
          {"error_gain_per_row", f.error_gain_per_row},
          {"slack_beta", f.slack_beta},
          {"slack_weight", f.slack_weight},
          {"damping", f.damping},
          {"slack_floor", f.slack_floor},
          {"violation_tolerance", f.violation_tolerance}};
}

json rect_json(const Rect& r) { return json::array({r.x_lo, r.x_hi, r.y_lo, r.y_hi}); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string protocol_tag(const std::exception& e) {
  if (dynamic_cast<const TimeoutError*>(&e)) return "timeout";
  if (dynamic_cast<const DesyncError*>(&e)) return "desync";
  if (dynamic_cast<const ConnectionClosed*>(&e)) return "closed";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
  return "io";
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << contents;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string_view policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kScripted:
      return "scripted";
    case PolicyKind::kRandom:
      return "random";
    case PolicyKind::kAdversarial:
      return "adversarial";
    case PolicyKind::kRemote:
      return "remote";
  }
  return "unknown";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  for (auto k : {PolicyKind::kScripted, PolicyKind::kRandom, PolicyKind::kAdversarial,
                 PolicyKind::kRemote})
    if (policy_kind_name(k) == name) return k;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  try {
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (!(ik_damping >= 0.0)) throw ConfigError("ik_damping must be >= 0");
    if (!(remote_timeout > 0.0)) throw ConfigError("remote_timeout must be > 0");
    if (policy == PolicyKind::kRemote && remote_address.empty())
      throw ConfigError("policy 'remote' needs a remote_address");
    filter.validate();
    world.validate();
    table.validate();
    arm.validate();
    policy_params.validate();
    if (!filter.error_gain_per_row.empty() && filter.error_gain_per_row.size() != 18)
      throw ConfigError("filter.error_gain_per_row must have one entry per constraint (18)");
    (void)reset_episode(world, arm, table);  // rejects an unsafe home_q
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::condition_label() const {
  return condition.empty() ? std::string(policy_kind_name(policy)) : condition;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  StrictReader r(j, "");

  std::string policy(policy_kind_name(cfg.policy));
  r.read("policy", policy);
  if (policy.starts_with("remote:")) {
    cfg.remote_address = policy.substr(7);
    policy = "remote";
  }
  const auto kind = parse_policy_kind(policy);
  if (!kind) throw ConfigError("unknown policy '" + policy + "'");
  cfg.policy = *kind;
  r.read("remote_address", cfg.remote_address);
  r.read("remote_timeout", cfg.remote_timeout);

  if (const json* s = r.child("safety")) {
    if (s->is_boolean()) {
      cfg.safety = s->get<bool>();
    } else if (s->is_string() && (*s == "on" || *s == "off")) {
      cfg.safety = *s == "on";
    } else {
      throw ConfigError("safety must be \"on\", \"off\" or a boolean");
    }
  }
  if (const json* e = r.child("episodes")) {
    if (!e->is_number_integer() || e->get<std::int64_t>() < 1)
      throw ConfigError("episodes must be a positive integer");
    cfg.episodes = e->get<std::size_t>();
  }
  if (const json* s = r.child("seed")) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<std::int64_t>() >= 0))
      throw ConfigError("seed must be a non-negative integer");
    cfg.seed = s->get<std::uint64_t>();
  }
  r.read("dt", cfg.world.dt);
  r.read("horizon", cfg.world.horizon);
  r.read("ik_damping", cfg.ik_damping);
  r.read("condition", cfg.condition);
  r.read("out", cfg.out_dir);
  r.read("trajectories", cfg.write_trajectories);
  if (const json* jb = r.child("jobs")) {
    if (!jb->is_number_integer() || jb->get<std::int64_t>() < 1)
      throw ConfigError("jobs must be a positive integer");
    cfg.jobs = jb->get<std::size_t>();
  }

  if (const json* f = r.child("filter")) {
    StrictReader fr(*f, r.sub("filter"));
    fr.read("error_gain", cfg.filter.error_gain);
    fr.read("error_gain_per_row", cfg.filter.error_gain_per_row);
    fr.read("slack_beta", cfg.filter.slack_beta);
    fr.read("slack_weight", cfg.filter.slack_weight);
    fr.read("damping", cfg.filter.damping);
    fr.read("slack_floor", cfg.filter.slack_floor);
    fr.read("violation_tolerance", cfg.filter.violation_tolerance);
    fr.finish();
  }
  if (const json* w = r.child("world")) {
    StrictReader wr(*w, r.sub("world"));
    wr.read_rect("puck_init_box", cfg.world.puck_init_box);
    wr.read("puck_speed_min", cfg.world.puck_speed_min);
    wr.read("puck_speed_max", cfg.world.puck_speed_max);
    wr.read_array("home_q", cfg.world.home_q);
    wr.finish();
  }
  if (const json* t = r.child("table")) {
    StrictReader tr(*t, r.sub("table"));
    tr.read("length", cfg.table.length);
    tr.read("width", cfg.table.width);
    tr.read("goal_center_y", cfg.table.goal_center_y);
    tr.read("goal_half_width", cfg.table.goal_half_width);
    tr.read("wall_restitution", cfg.table.wall_restitution);
    tr.read("puck_radius", cfg.table.puck_radius);
    tr.read("mallet_radius", cfg.table.mallet_radius);
    tr.read("puck_damping", cfg.table.puck_damping);
    tr.read("max_puck_speed", cfg.table.max_puck_speed);
    tr.read("link_clearance", cfg.table.link_clearance);
    tr.finish();
  }
  if (const json* a = r.child("arm")) {
    StrictReader ar(*a, r.sub("arm"));
    ar.read_array("link_lengths", cfg.arm.link_lengths);
    ar.read_vec2("base_position", cfg.arm.base_position);
    ar.read_array("q_min", cfg.arm.q_min);
    ar.read_array("q_max", cfg.arm.q_max);
    ar.read("qd_max", cfg.arm.qd_max);
    ar.finish();
  }
  if (const json* p = r.child("policy_params")) {
    StrictReader pr(*p, r.sub("policy_params"));
    pr.read("v_ee_max", cfg.policy_params.v_ee_max);
    pr.read("approach_offset", cfg.policy_params.approach_offset);
    pr.read("pos_tol", cfg.policy_params.pos_tol);
    pr.read("strike_speed", cfg.policy_params.strike_speed);
    pr.read("approach_gain", cfg.policy_params.approach_gain);
    pr.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& t = cfg.table;
  const auto& a = cfg.arm;
  const auto& p = cfg.policy_params;
  return {
      {"policy", policy_kind_name(cfg.policy)},
      {"remote_address", cfg.remote_address},
      {"remote_timeout", cfg.remote_timeout},
      {"safety", cfg.safety ? "on" : "off"},
      {"episodes", cfg.episodes},
      {"seed", cfg.seed},
      {"dt", cfg.world.dt},
      {"horizon", cfg.world.horizon},
      {"ik_damping", cfg.ik_damping},
      {"condition", cfg.condition},
      {"out", cfg.out_dir},
      {"trajectories", cfg.write_trajectories},
      {"jobs", cfg.jobs},
      {"filter", filter_json(cfg.filter)},
      {"world",
       {{"puck_init_box", rect_json(cfg.world.puck_init_box)},
        {"puck_speed_min", cfg.world.puck_speed_min},
        {"puck_speed_max", cfg.world.puck_speed_max},
        {"home_q", cfg.world.home_q}}},
      {"table",
       {{"length", t.length},
        {"width", t.width},
        {"goal_center_y", t.goal_center_y},
        {"goal_half_width", t.goal_half_width},
        {"wall_restitution", t.wall_restitution},
        {"puck_radius", t.puck_radius},
        {"mallet_radius", t.mallet_radius},
        {"puck_damping", t.puck_damping},
        {"max_puck_speed", t.max_puck_speed},
        {"link_clearance", t.link_clearance}}},
      {"arm",
       {{"link_lengths", a.link_lengths},
        {"base_position", {a.base_position.x, a.base_position.y}},
        {"q_min", a.q_min},
        {"q_max", a.q_max},
        {"qd_max", a.qd_max}}},
      {"policy_params",
       {{"v_ee_max", p.v_ee_max},
        {"approach_offset", p.approach_offset},
        {"pos_tol", p.pos_tol},
        {"strike_speed", p.strike_speed},
        {"approach_gain", p.approach_gain}}},
  };
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("out");
  j.erase("trajectories");
  j.erase("jobs");
  const std::string canonical = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string trajectory_record_json(const TrajectoryRecord& r) {
  const json j = {
      {"t", r.t},
      {"q", r.q},
      {"qd", r.qd},
      {"puck_p", {r.puck_p.x, r.puck_p.y}},
      {"puck_v", {r.puck_v.x, r.puck_v.y}},
      {"u_nom", r.u_nom},
      {"u_safe", r.u_safe},
      {"max_violation", r.max_violation},
      {"success_latched", r.success_latched},
  };
  return j.dump();
}

ConstraintSet make_constraints(const ExperimentConfig& cfg) {
  return default_constraints(cfg.arm, cfg.table);
}

SafetyFilter make_filter(const ExperimentConfig& cfg) {
  return SafetyFilter(make_velocity_integrator(3, cfg.arm.qd_max), make_constraints(cfg),
                      cfg.filter);
}

std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg) {
  switch (cfg.policy) {
    case PolicyKind::kScripted:
      return std::make_unique<ScriptedExpertPolicy>(cfg.table, cfg.policy_params);
    case PolicyKind::kRandom:
      return std::make_unique<RandomPolicy>(cfg.policy_params);
    case PolicyKind::kAdversarial:
      return std::make_unique<AdversarialPolicy>(cfg.table, cfg.policy_params);
    case PolicyKind::kRemote: {
      const auto timeout = std::chrono::milliseconds(
          static_cast<std::int64_t>(std::llround(cfg.remote_timeout * 1000.0)));
      return RemotePolicy::connect(cfg.remote_address, cfg.arm, cfg.policy_params.v_ee_max,
                                   timeout);
    }
  }
  throw ConfigError("unknown policy kind");
}

EpisodeResult run_episode(const ExperimentConfig& cfg, Policy& policy, const WorldState& world0,
                          std::uint64_t seed, SafetyFilter* filter,
                          std::vector<TrajectoryRecord>* log) {
  const ConstraintSet constraints = filter ? filter->constraints() : make_constraints(cfg);
  const double dt = cfg.world.dt;
  const double qd_max = cfg.arm.qd_max;
  const std::size_t max_steps = cfg.world.max_steps();

  EpisodeResult result;
  result.seed = seed;
  WorldState world = world0;
  result.max_violation =
      max_violation(constraints.evaluate(world.q).values, constraints.row_scale());
  if (filter) filter->reset(world.q);

  try {
    policy.reset(seed);
  } catch (const ProtocolError& e) {
    result.protocol_error = protocol_tag(e);
    return result;
  } catch (const IoError& e) {
    result.protocol_error = protocol_tag(e);
    return result;
  }

  for (std::size_t step = 0; step < max_steps; ++step) {
    const Observation obs = observe(world, cfg.arm);
    Vec2 v_ee;
    try {
      v_ee = policy.act(obs);
    } catch (const ProtocolError& e) {
      result.protocol_error = protocol_tag(e);
      break;
    } catch (const IoError& e) {
      result.protocol_error = protocol_tag(e);
      break;
    }
    v_ee = clamp_ee_velocity(v_ee, policy.v_ee_max());

    const Vector qd_nom = dls_inverse_kinematics(ee_jacobian(cfg.arm, world.q), v_ee, cfg.ik_damping);
    JointVector u_nom{qd_nom[0], qd_nom[1], qd_nom[2]};
    JointVector u{};
    if (filter) {
      const FilterOutput out = filter->filter_action(world.q, u_nom);
      filter->advance_slack(out.mu_dot, dt);
      std::copy(out.u_safe.begin(), out.u_safe.end(), u.begin());
      if (out.diagnostics.correction_clipped) ++result.clipped_steps;
    } else {
      for (std::size_t i = 0; i < 3; ++i) u[i] = std::clamp(u_nom[i], -qd_max, qd_max);
    }

    world = step_world(world, u, dt, cfg.arm, cfg.table);
    const double violation =
        max_violation(constraints.evaluate(world.q).values, constraints.row_scale());
    result.max_violation = std::max(result.max_violation, violation);
    ++result.steps;

    if (log) {
      log->push_back({world.t, world.q, world.qd, world.puck_p, world.puck_v, u_nom, u, violation,
                      world.goal_scored});
    }
    if (world.goal_scored) break;
  }
  result.success = world.goal_scored && result.protocol_error.empty();
  return result;
}

json summary_to_json(const ExperimentSummary& s) {
  return {{"condition", s.condition},
          {"policy", s.policy},
          {"safety", s.safety ? "on" : "off"},
          {"episodes", s.episodes},
          {"success_rate", s.success_rate},
          {"mean_max_violation", s.mean_max_violation},
          {"p95_max_violation", s.p95_max_violation},
          {"violation_rate", s.violation_rate},
          {"protocol_errors", s.protocol_errors},
          {"config_hash", s.config_hash}};
}

ExperimentSummary summary_from_json(const json& j) {
  ExperimentSummary s;
  try {
    s.condition = j.at("condition").get<std::string>();
    s.policy = j.value("policy", std::string());
    const json& safety = j.at("safety");
    s.safety = safety.is_boolean() ? safety.get<bool>() : safety.get<std::string>() == "on";
    s.episodes = j.at("episodes").get<std::size_t>();
    s.success_rate = j.at("success_rate").get<double>();
    s.mean_max_violation = j.at("mean_max_violation").get<double>();
    s.p95_max_violation = j.at("p95_max_violation").get<double>();
    s.violation_rate = j.value("violation_rate", 0.0);
    s.protocol_errors = j.value("protocol_errors", std::size_t{0});
    s.config_hash = j.value("config_hash", std::string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed summary: ") + e.what());
  }
  return s;
}

ExperimentSummary summarize(const ExperimentConfig& cfg, const std::vector<EpisodeResult>& results) {
  ExperimentSummary s;
  s.condition = cfg.condition_label();
  s.policy = std::string(policy_kind_name(cfg.policy));
  s.safety = cfg.safety;
  s.episodes = results.size();
  s.config_hash = config_hash(cfg);
  if (results.empty()) return s;

  std::vector<double> violations;
  std::size_t successes = 0, violating = 0;
  double sum = 0.0;
  for (const auto& r : results) {
    successes += r.success ? 1 : 0;
    violating += r.max_violation > cfg.filter.violation_tolerance ? 1 : 0;
    s.protocol_errors += r.protocol_error.empty() ? 0 : 1;
    sum += r.max_violation;
    violations.push_back(r.max_violation);
  }
  const double n = static_cast<double>(results.size());
  s.success_rate = static_cast<double>(successes) / n;
  s.violation_rate = static_cast<double>(violating) / n;
  s.mean_max_violation = sum / n;
  std::sort(violations.begin(), violations.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
  s.p95_max_violation = violations[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

ExperimentRun run_experiment_in_memory(const ExperimentConfig& cfg, bool keep_trajectories) {
  cfg.validate();
  ExperimentRun run;
  run.results.resize(cfg.episodes);
  if (keep_trajectories) run.trajectories.resize(cfg.episodes);

  auto run_range = [&](Policy& policy, SafetyFilter* filter, std::atomic<std::size_t>& next) {
    for (std::size_t i = next++; i < cfg.episodes; i = next++) {
      EpisodeConfig ep = cfg.world;
      ep.seed = cfg.seed + i;
      const WorldState world0 = reset_episode(ep, cfg.arm, cfg.table);
      run.results[i] = run_episode(cfg, policy, world0, ep.seed, filter,
                                   keep_trajectories ? &run.trajectories[i] : nullptr);
    }
  };

  // A remote policy is a single connection: keep it sequential.
  const std::size_t workers =
      cfg.policy == PolicyKind::kRemote ? 1 : std::min(cfg.jobs, cfg.episodes);
  std::atomic<std::size_t> next{0};
  if (workers <= 1) {
    auto policy = make_policy(cfg);
    std::optional<SafetyFilter> filter;
    if (cfg.safety) filter.emplace(make_filter(cfg));
    run_range(*policy, filter ? &*filter : nullptr, next);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          auto policy = make_policy(cfg);
          std::optional<SafetyFilter> filter;
          if (cfg.safety) filter.emplace(make_filter(cfg));
          run_range(*policy, filter ? &*filter : nullptr, next);
        } catch (...) {
          errors[w] = std::current_exception();
          next = cfg.episodes;
        }
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  run.summary = summarize(cfg, run.results);
  return run;
}

std::string episodes_csv(const std::vector<EpisodeResult>& results) {
  std::string out = "seed,steps,success,max_violation,clipped_steps,protocol_error\n";
  for (const auto& r : results) {
    out += std::to_string(r.seed) + ',' + std::to_string(r.steps) + ',' + (r.success ? "1" : "0") +
           ',' + wire::format_double(r.max_violation) + ',' + std::to_string(r.clipped_steps) +
           ',' + csv_field(r.protocol_error) + '\n';
  }
  return out;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  {
    // Fail before spending time on episodes.
    std::ofstream probe(dir / "episodes.csv", std::ios::binary | std::ios::trunc);
    if (!probe) throw IoError("output directory " + dir.string() + " is not writable");
  }

  const ExperimentRun run = run_experiment_in_memory(cfg, cfg.write_trajectories);

  json effective = config_to_json(cfg);
  effective["config_hash"] = run.summary.config_hash;
  write_file(dir / "config.json", effective.dump(2) + "\n");
  write_file(dir / "episodes.csv", episodes_csv(run.results));
  write_file(dir / "summary.json", summary_to_json(run.summary).dump(2) + "\n");
  if (cfg.write_trajectories) {
    for (std::size_t i = 0; i < run.results.size(); ++i) {
      std::string lines;
      for (const auto& rec : run.trajectories[i]) lines += trajectory_record_json(rec) + "\n";
      write_file(dir / ("traj-" + std::to_string(run.results[i].seed) + ".jsonl"), lines);
    }
  }
  return run.summary;
}

std::string compare_report(const std::vector<ExperimentSummary>& summaries) {
  if (summaries.empty()) throw ContractViolation("compare_report: need at least one summary");
  std::string out = "condition,safety,success_rate,mean_max_violation,p95_max_violation\n";
  for (const auto& s : summaries) {
    out += csv_field(s.condition) + ',' + (s.safety ? "on" : "off") + ',' +
           wire::format_double(s.success_rate) + ',' + wire::format_double(s.mean_max_violation) +
           ',' + wire::format_double(s.p95_max_violation) + '\n';
  }
  return out;
}

}  // namespace safety_layer
