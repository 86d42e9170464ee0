// bandplan command line: run seeded batches, emit plot data, validate scenarios.
//
//   bandplan run <scenario.json> --trials N --seed S --out DIR
//   bandplan plot <trajectory.jsonl> --out DIR
//   bandplan validate <scenario.json>
//
// Exit codes: 0 all trials succeeded / input valid, 1 some trial failed,
// 2 configuration or input error.

#include "bandplan/batch.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformable object manipulation with virtual elastic band planning"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  int jobs = 0;
  int log_stride = 1;
  bool no_logs = false;
  auto* run = app.add_subcommand("run", "Run a seeded batch of trials");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--trials", trials, "Number of trials (default: scenario trials.count)");
  run->add_option("--seed", seed, "Base seed (default: scenario trials.seed)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)");
  run->add_option("--log-stride", log_stride, "Log every k-th controller step")->check(CLI::PositiveNumber);
  run->add_flag("--no-logs", no_logs, "Skip per-trial trajectory logs");

  std::string log_path;
  std::string plot_out = "plots";
  int bins = 10;
  auto* plot = app.add_subcommand("plot", "Turn a trajectory log into plot-ready CSV files");
  plot->add_option("log", log_path, "Trajectory log (JSON lines)")->required();
  plot->add_option("--out", plot_out, "Output directory");
  plot->add_option("--bins", bins, "Planning-time histogram bins")->check(CLI::PositiveNumber);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("scenario", validate_path, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      const bandplan::Scenario scenario = bandplan::load_scenario(scenario_path);
      bandplan::BatchOptions options;
      options.trials = trials.value_or(scenario.trials.count);
      options.seed = seed.value_or(scenario.trials.seed);
      options.out_dir = out_dir;
      options.jobs = jobs;
      options.log_stride = log_stride;
      options.write_logs = !no_logs;
      const bandplan::BatchResult result = bandplan::run_batch(scenario, options);
      int successes = 0;
      for (const auto& t : result.trials) {
        const bool ok = t.outcome == bandplan::Outcome::Success;
        successes += ok;
        std::printf("seed %llu: %s steps=%d plans=%d%s%s\n", static_cast<unsigned long long>(t.seed),
                    ok ? "success" : "failure", t.steps, t.planner_invocations(), ok ? "" : " reason=",
                    ok ? "" : t.failure_reason.c_str());
      }
      std::printf("%d/%d trials succeeded; stats written to %s/stats.csv\n", successes, options.trials,
                  out_dir.c_str());
      return result.all_success() ? kExitOk : kExitFailure;
    }
    if (*plot) {
      bandplan::emit_plot_data(log_path, plot_out, bins);
      std::printf("plot data written to %s\n", plot_out.c_str());
      return kExitOk;
    }
    if (*validate) {
      const bandplan::Scenario scenario = bandplan::load_scenario(validate_path);
      std::printf("%s: ok (%s, %zu targets, %zu obstacles)\n", validate_path.c_str(),
                  scenario.object.type == bandplan::Topology::Rope ? "rope" : "cloth", scenario.task.targets.size(),
                  scenario.scene.obstacles.size());
      return kExitOk;
    }
  } catch (const bandplan::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bandplan::LogFormatError& e) {
    std::cerr << "malformed trajectory log: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
