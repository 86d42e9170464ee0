#pragma once

#include "bandplan/framework.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace bandplan {

/// One stats.csv row: the planning statistics of one trial.
struct StatsRow {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::Failure;
  int steps = 0;
  int planner_invocations = 0;
  std::size_t samples = 0;
  std::size_t vertices = 0;
  double nn_time = 0.0;
  double validity_time = 0.0;
  double plan_total_time = 0.0;
  int smoothing_iterations = 0;
  double smoothing_time = 0.0;
};

/// Column names of stats.csv, in order.
const std::vector<std::string>& stats_columns();

/// Sums the planner statistics over every planner invocation of a trial.
StatsRow stats_row(const TrialResult& trial);

/// CSV text: header, one row per trial, then "mean" and "std" footer rows.
std::string format_stats_csv(const std::vector<StatsRow>& rows);

struct BatchOptions {
  int trials = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  bool write_logs = true;
  int log_stride = 1;  // log every k-th step (steps with a plan are always logged)
  int jobs = 0;        // worker threads; 0 = hardware concurrency
};

struct BatchResult {
  std::vector<TrialResult> trials;
  std::vector<StatsRow> rows;

  bool all_success() const;
};

/// Runs seeds seed, seed+1, ... and writes stats.csv plus one trajectory log
/// (trial_<seed>.jsonl) per trial into out_dir.
BatchResult run_batch(const Scenario& scenario, const BatchOptions& options);

/// Thrown for malformed trajectory logs; carries the 1-based line number.
class LogFormatError : public std::runtime_error {
 public:
  LogFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads a trajectory log and writes plan_time_histogram.csv, rho.csv and
/// band_length.csv into out_dir.
void emit_plot_data(const std::filesystem::path& log, const std::filesystem::path& out_dir, int histogram_bins = 10);

}  // namespace bandplan
