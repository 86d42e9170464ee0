#include "bandplan/batch.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace bandplan {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string>& stats_columns() {
  static const std::vector<std::string> columns{
      "seed",     "outcome", "steps",         "planner_invocations", "samples",        "vertices",
      "nn_time",  "validity_time", "plan_total_time", "smoothing_iterations", "smoothing_time"};
  return columns;
}

StatsRow stats_row(const TrialResult& trial) {
  StatsRow row;
  row.seed = trial.seed;
  row.outcome = trial.outcome;
  row.steps = trial.steps;
  row.planner_invocations = trial.planner_invocations();
  for (const auto& p : trial.plans) {
    row.samples += p.stats.samples;
    row.vertices += p.stats.vertices;
    row.nn_time += p.stats.nn_time;
    row.validity_time += p.stats.validity_time;
    row.plan_total_time += p.stats.total_time;
    row.smoothing_iterations += p.stats.smoothing_iterations;
    row.smoothing_time += p.stats.smoothing_time;
  }
  return row;
}

namespace {

/// Times are written with microsecond resolution; footers are computed from
/// the written values so they recompute exactly from the rows.
double rounded_time(double t) { return std::round(t * 1e6) / 1e6; }

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<double> numeric_row(const StatsRow& r) {
  return {r.outcome == Outcome::Success ? 1.0 : 0.0,
          static_cast<double>(r.steps),
          static_cast<double>(r.planner_invocations),
          static_cast<double>(r.samples),
          static_cast<double>(r.vertices),
          rounded_time(r.nn_time),
          rounded_time(r.validity_time),
          rounded_time(r.plan_total_time),
          static_cast<double>(r.smoothing_iterations),
          rounded_time(r.smoothing_time)};
}

}  // namespace

std::string format_stats_csv(const std::vector<StatsRow>& rows) {
  std::ostringstream out;
  const auto& cols = stats_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\n";
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    values.push_back(numeric_row(r));
    out << r.seed << "," << (r.outcome == Outcome::Success ? "success" : "failure") << "," << r.steps << ","
        << r.planner_invocations << "," << r.samples << "," << r.vertices << "," << fmt("%.6f", r.nn_time) << ","
        << fmt("%.6f", r.validity_time) << "," << fmt("%.6f", r.plan_total_time) << "," << r.smoothing_iterations
        << "," << fmt("%.6f", r.smoothing_time) << "\n";
  }
  // Footer: mean and sample standard deviation of every column; the outcome
  // column holds the success fraction.
  const std::size_t n = values.size();
  const std::size_t k = cols.size() - 1;
  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (const auto& v : values)
    for (std::size_t c = 0; c < k; ++c) mean[c] += v[c];
  for (std::size_t c = 0; c < k && n > 0; ++c) mean[c] /= static_cast<double>(n);
  for (const auto& v : values)
    for (std::size_t c = 0; c < k; ++c) sd[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
  for (std::size_t c = 0; c < k; ++c) sd[c] = n > 1 ? std::sqrt(sd[c] / static_cast<double>(n - 1)) : 0.0;
  out << "mean";
  for (double m : mean) out << "," << fmt("%.12f", m);
  out << "\nstd";
  for (double s : sd) out << "," << fmt("%.12f", s);
  out << "\n";
  return out.str();
}

bool BatchResult::all_success() const {
  return std::all_of(trials.begin(), trials.end(), [](const TrialResult& t) { return t.outcome == Outcome::Success; });
}

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json points_json(const std::vector<Vec3>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(vec3_json(p));
  return a;
}

json plan_json(const PlanEvent& ev) {
  json path = json::array();
  for (const auto& q : ev.path) path.push_back(json::array({q[0], q[1], q[2], q[3], q[4], q[5]}));
  return {{"trigger", ev.trigger},
          {"success", ev.success},
          {"samples", ev.stats.samples},
          {"vertices", ev.stats.vertices},
          {"nn_time", ev.stats.nn_time},
          {"validity_time", ev.stats.validity_time},
          {"total_time", ev.stats.total_time},
          {"smoothing_time", ev.stats.smoothing_time},
          {"smoothing_iterations", ev.stats.smoothing_iterations},
          {"blacklist_size", ev.blacklist_size},
          {"final_vis_check", ev.final_vis_check},
          {"goals", json::array({vec3_json(ev.goals[0]), vec3_json(ev.goals[1])})},
          {"path", path}};
}

json step_json(const StepRecord& r) {
  json j{{"type", "step"},
         {"step", r.step},
         {"mode", to_string(r.mode)},
         {"grippers", json::array({r.grippers[0], r.grippers[1], r.grippers[2], r.grippers[3], r.grippers[4],
                                   r.grippers[5]})},
         {"rho", r.error},
         {"covered", r.covered},
         {"band_length", r.band_length},
         {"l_max", r.l_max},
         {"max_stretch", r.max_stretch}};
  if (r.points) j["points"] = points_json(*r.points);
  if (r.band) j["band"] = points_json(r.band->points);
  if (r.plan) j["plan"] = plan_json(*r.plan);
  return j;
}

TrialResult run_logged(const PreparedScenario& prepared, std::uint64_t seed, const BatchOptions& options) {
  if (!options.write_logs) return main_loop(prepared, seed);
  const fs::path log_path = options.out_dir / ("trial_" + std::to_string(seed) + ".jsonl");
  std::ofstream log(log_path);
  if (!log) throw ConfigError(log_path.string() + ": cannot write trajectory log");
  const int stride = std::max(options.log_stride, 1);
  TrialResult result = main_loop(prepared, seed, [&](const StepRecord& rec) {
    if (rec.plan || rec.step % stride == 0) log << step_json(rec).dump() << "\n";
  });
  log << json{{"type", "result"},
              {"seed", result.seed},
              {"outcome", result.outcome == Outcome::Success ? "success" : "failure"},
              {"failure_reason", result.failure_reason},
              {"steps", result.steps},
              {"final_rho", result.final_error},
              {"l_max", result.l_max},
              {"planner_invocations", result.planner_invocations()}}
             .dump()
      << "\n";
  return result;
}

}  // namespace

BatchResult run_batch(const Scenario& scenario, const BatchOptions& options) {
  if (options.trials < 1) throw ConfigError("trials: must be >= 1");
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  {
    std::ofstream probe(options.out_dir / "stats.csv");
    if (!probe) throw ConfigError(options.out_dir.string() + ": output directory is not writable");
  }
  const PreparedScenario prepared = prepare(scenario);

  BatchResult result;
  result.trials.resize(static_cast<std::size_t>(options.trials));
  const int jobs = std::clamp(options.jobs > 0 ? options.jobs : static_cast<int>(std::thread::hardware_concurrency()),
                              1, options.trials);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < options.trials; i = next++) {
      try {
        result.trials[static_cast<std::size_t>(i)] =
            run_logged(prepared, options.seed + static_cast<std::uint64_t>(i), options);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  for (const auto& t : result.trials) result.rows.push_back(stats_row(t));
  std::ofstream csv(options.out_dir / "stats.csv");
  csv << format_stats_csv(result.rows);
  if (!csv) throw ConfigError(options.out_dir.string() + ": failed to write stats.csv");
  return result;
}

void emit_plot_data(const fs::path& log, const fs::path& out_dir, int histogram_bins) {
  std::ifstream in(log);
  if (!in) throw ConfigError(log.string() + ": cannot open trajectory log");
  std::vector<double> plan_times;
  std::vector<std::pair<int, double>> rho;
  struct BandRow {
    int step;
    double length;
    double l_max;
    std::string mode;
  };
  std::vector<BandRow> bands;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LogFormatError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
      throw LogFormatError(line_no, "missing record type");
    }
    const std::string type = j["type"].get<std::string>();
    if (type == "result") continue;
    if (type != "step") throw LogFormatError(line_no, "unknown record type '" + type + "'");
    try {
      const int step = j.at("step").get<int>();
      rho.emplace_back(step, j.at("rho").get<double>());
      bands.push_back({step, j.at("band_length").get<double>(), j.at("l_max").get<double>(),
                       j.at("mode").get<std::string>()});
      if (j.contains("plan")) {
        const json& p = j["plan"];
        plan_times.push_back(p.at("total_time").get<double>() + p.at("smoothing_time").get<double>());
      }
    } catch (const json::exception& e) {
      throw LogFormatError(line_no, std::string("malformed step record: ") + e.what());
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  auto open = [&](const char* name) {
    std::ofstream f(out_dir / name);
    if (!f) throw ConfigError((out_dir / name).string() + ": cannot write");
    return f;
  };

  {
    // Equal-width bins over [0, max plan time].
    auto f = open("plan_time_histogram.csv");
    f << "bin_start,bin_end,count\n";
    const int bins = std::max(histogram_bins, 1);
    const double hi = plan_times.empty() ? 1.0 : std::max(*std::max_element(plan_times.begin(), plan_times.end()), 1e-9);
    const double width = hi / bins;
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (double t : plan_times) {
      const int b = std::min(static_cast<int>(t / width), bins - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b) {
      f << fmt("%.6f", b * width) << "," << fmt("%.6f", (b + 1) * width) << "," << counts[static_cast<std::size_t>(b)]
        << "\n";
    }
  }
  {
    auto f = open("rho.csv");
    f << "step,rho\n";
    for (const auto& [s, r] : rho) f << s << "," << fmt("%.9g", r) << "\n";
  }
  {
    auto f = open("band_length.csv");
    f << "step,band_length,l_max,mode\n";
    for (const auto& b : bands) f << b.step << "," << fmt("%.9g", b.length) << "," << fmt("%.9g", b.l_max) << "," << b.mode << "\n";
  }
}

}  // namespace bandplan
