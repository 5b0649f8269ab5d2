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

// safety_harness: run experiments, merge summaries, run the self-test.
//
//   safety_harness run --config cfg.json [--policy X] [--safety on|off] ...
//   safety_harness report --in a/summary.json b/summary.json --out report.csv
//   safety_harness selftest
//
// Exit codes: 0 ok, 1 config error, 2 runtime/protocol error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "safety_layer/errors.hpp"
#include "safety_layer/harness.hpp"
#include "safety_layer/kernels.hpp"

namespace sl = safety_layer;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct RunArgs {
  std::string config;
  std::optional<std::string> policy;
  std::optional<std::string> safety;
  std::optional<std::size_t> episodes;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> condition;
  std::optional<std::size_t> jobs;
  bool trajectories = false;
};

int do_run(const RunArgs& args) {
  sl::ExperimentConfig cfg = args.config.empty() ? sl::ExperimentConfig{}
                                                 : sl::load_config(args.config);
  if (args.policy) {
    std::string name = *args.policy;
    if (name.starts_with("remote:")) {
      cfg.remote_address = name.substr(7);
      name = "remote";
    }
    const auto kind = sl::parse_policy_kind(name);
    if (!kind) throw sl::ConfigError("unknown policy '" + *args.policy + "'");
    cfg.policy = *kind;
  }
  if (args.safety) cfg.safety = *args.safety == "on";
  if (args.episodes) cfg.episodes = *args.episodes;
  if (args.seed) cfg.seed = *args.seed;
  if (args.out) cfg.out_dir = *args.out;
  if (args.condition) cfg.condition = *args.condition;
  if (args.jobs) cfg.jobs = *args.jobs;
  if (args.trajectories) cfg.write_trajectories = true;
  cfg.validate();

  const sl::ExperimentSummary s = sl::run_experiment(cfg);
  std::cout << sl::summary_to_json(s).dump(2) << "\n";
  if (s.protocol_errors > 0) {
    std::cerr << "error: " << s.protocol_errors
              << " episode(s) aborted by protocol errors, see episodes.csv\n";
    return kExitRuntime;
  }
  return 0;
}

int do_report(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<sl::ExperimentSummary> summaries;
  for (std::string path : inputs) {
    // A run directory stands for its summary.json.
    if (std::filesystem::is_directory(path))
      path = (std::filesystem::path(path) / "summary.json").string();
    std::ifstream in(path);
    if (!in) throw sl::ConfigError("cannot open summary " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw sl::ConfigError("summary " + path + " is not valid JSON: " + e.what());
    }
    summaries.push_back(sl::summary_from_json(j));
  }
  const std::string csv = sl::compare_report(summaries);
  if (out_path.empty() || out_path == "-") {
    std::cout << csv;
    return 0;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw sl::IoError("cannot write " + out_path);
  out << csv;
  if (!out) throw sl::IoError("failed writing " + out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);

  CLI::App app{"Safety-filter experiment harness for the planar air-hockey task"};
  app.require_subcommand(1);
  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "Kernel backend: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Run an experiment and write its outputs");
  run->add_option("--config", run_args.config, "Experiment config (JSON)");
  run->add_option("--policy", run_args.policy,
                  "scripted, random, adversarial or remote:ADDRESS (tcp:HOST:PORT, exec:CMD)");
  run->add_option("--safety", run_args.safety, "on or off")->check(CLI::IsMember({"on", "off"}));
  run->add_option("--episodes", run_args.episodes, "Number of episodes")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", run_args.seed, "First episode seed");
  run->add_option("--out", run_args.out, "Output directory");
  run->add_option("--condition", run_args.condition, "Label used in reports");
  run->add_option("--jobs", run_args.jobs, "Episodes run in parallel")->check(CLI::PositiveNumber);
  run->add_flag("--trajectories", run_args.trajectories, "Write traj-<seed>.jsonl per episode");

  std::vector<std::string> report_in;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "Merge summary.json files into one CSV");
  report->add_option("--in", report_in, "summary.json files or run directories")->required();
  report->add_option("--out", report_out, "Output CSV ('-' for stdout)");

  CLI::App* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (kernels != "auto") sl::kernels::select(*sl::kernels::parse_backend(kernels));
    if (*run) return do_run(run_args);
    if (*report) return do_report(report_in, report_out);
    if (*selftest) return sl::run_selftest(std::cout) ? 0 : kExitRuntime;
  } catch (const sl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const sl::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
