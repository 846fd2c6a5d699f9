// cachecast: synthetic cache-federation traces, simulation, telemetry
// aggregation and LSTM forecasting, end to end from the command line.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cachecast/cachecast.hpp"

namespace fs = std::filesystem;
using namespace cachecast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.flush();
  if (!out) throw ConfigError("cannot write " + path.string());
}

TraceFormat format_for(const fs::path& path) {
  return path.extension() == ".csv" ? TraceFormat::Csv : TraceFormat::JsonLines;
}

nlohmann::json load_config(const fs::path& path) {
  return detail::parse_config_text(read_file(path),
                                   ("config " + path.string()).c_str());
}

Trace load_trace(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return parse_trace(in, format_for(path), path.filename().string());
}

class ManifestBuilder {
 public:
  ManifestBuilder(int argc, char** argv, std::uint64_t seed)
      : start_(std::chrono::steady_clock::now()) {
    for (int i = 0; i < argc; ++i) {
      if (i) manifest_.command_line += ' ';
      manifest_.command_line += argv[i];
    }
    manifest_.seed = seed;
  }

  void add_config(const fs::path& path) {
    manifest_.configs.push_back({path.string(), sha256_file(path.string())});
  }

  void add_output(const fs::path& path) {
    manifest_.outputs.push_back({path.string(), sha256_file(path.string())});
  }

  void write(const fs::path& path) {
    manifest_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    write_file(path, manifest_to_json(manifest_).dump(2) + "\n");
  }

 private:
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

struct GlobalOpts {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  std::string out;
  unsigned jobs = 1;
};

int cmd_generate(int argc, char** argv, const GlobalOpts& g,
                 const std::string& format_name) {
  if (g.config.empty()) throw ConfigError("generate: --config is required");
  if (g.out.empty()) throw ConfigError("generate: --out is required");
  auto spec = workload_from_json(load_config(g.config));
  if (g.seed_set) spec.rng_seed = g.seed;

  ManifestBuilder manifest(argc, argv, spec.rng_seed);
  manifest.add_config(g.config);

  const Trace trace = generate(spec);
  TraceFormat format = format_for(g.out);
  if (format_name == "csv") format = TraceFormat::Csv;
  if (format_name == "jsonl") format = TraceFormat::JsonLines;
  std::ostringstream body;
  write_trace(trace, format, body);
  write_file(g.out, body.str());
  manifest.add_output(g.out);
  manifest.write(g.out + ".manifest.json");
  std::cout << "wrote " << trace.records.size() << " requests to " << g.out
            << "\n";
  return kExitOk;
}

int cmd_simulate(int argc, char** argv, const GlobalOpts& g,
                 const std::string& trace_path, std::string report_path) {
  if (g.config.empty()) throw ConfigError("simulate: --config is required");
  if (g.out.empty()) throw ConfigError("simulate: --out is required");
  auto federation = federation_from_json(load_config(g.config));
  if (g.seed_set) federation.rng_seed = g.seed;

  ManifestBuilder manifest(argc, argv, federation.rng_seed);
  manifest.add_config(g.config);

  const Trace requests = load_trace(trace_path);
  const SimulationReport report = simulate(requests, federation);

  std::ostringstream body;
  write_trace(report.resolved, format_for(g.out), body);
  write_file(g.out, body.str());
  if (report_path.empty()) report_path = g.out + ".report.json";
  write_file(report_path, report_to_json(report).dump(2) + "\n");
  manifest.add_output(g.out);
  manifest.add_output(report_path);
  manifest.write(g.out + ".manifest.json");
  std::cout << report_to_json(report)["summary"].dump(2) << "\n";
  return kExitOk;
}

int cmd_aggregate(int argc, char** argv, const GlobalOpts& g,
                  const std::string& trace_path,
                  const std::string& granularity_name_str) {
  if (g.out.empty()) throw ConfigError("aggregate: --out is required");
  auto granularity = granularity_from_name(granularity_name_str);
  if (!granularity)
    throw ConfigError("aggregate: granularity must be hourly or daily");

  ManifestBuilder manifest(argc, argv, g.seed);
  const Trace trace = load_trace(trace_path);
  const auto bins = bin_trace(trace, *granularity);
  std::ostringstream body;
  write_bins_csv(bins, body);
  write_file(g.out, body.str());
  manifest.add_output(g.out);
  manifest.write(g.out + ".manifest.json");
  std::cout << "wrote " << bins.size() << " bins to " << g.out << "\n";
  return kExitOk;
}

int cmd_forecast(int argc, char** argv, const GlobalOpts& g,
                 const std::string& bins_path, const std::string& target_name_str,
                 std::size_t smooth) {
  if (g.out.empty()) throw ConfigError("forecast: --out is required");
  if (smooth == 0) throw ConfigError("forecast: --smooth must be >= 1");

  std::ifstream bins_in(bins_path, std::ios::binary);
  if (!bins_in) throw ConfigError("cannot open " + bins_path);
  std::vector<BinFeatures> bins;
  try {
    bins = read_bins_csv(bins_in);
  } catch (const std::runtime_error& e) {
    throw AggregateError(AggregateError::Kind::EmptyTrace, e.what());
  }
  if (bins.empty())
    throw AggregateError(AggregateError::Kind::EmptyTrace,
                         bins_path + " contains no bins");

  ForecastConfig base;
  bool window_from_config = false;
  if (!g.config.empty()) {
    auto j = load_config(g.config);
    base = forecast_config_from_json(j);
    window_from_config = j.contains("window_length");
  }
  if (!window_from_config)
    base.window_length = default_window_length(bins.front().granularity);
  if (g.seed_set) base.rng_seed = g.seed;

  std::vector<TargetFeature> targets;
  if (target_name_str == "all") {
    targets.assign(kAllTargets.begin(), kAllTargets.end());
  } else if (!target_name_str.empty()) {
    auto t = target_from_name(target_name_str);
    if (!t) throw ConfigError("forecast: unknown target " + target_name_str);
    targets = {*t};
  } else {
    targets = {base.target};
  }

  ManifestBuilder manifest(argc, argv, base.rng_seed);
  if (!g.config.empty()) manifest.add_config(g.config);

  std::vector<ForecastRun> runs(targets.size());
  auto run_one = [&](std::size_t i) {
    ForecastConfig config = base;
    config.target = targets[i];
    runs[i] = forecast_smoothed(bins, config, smooth);
  };
  const unsigned jobs = std::max(1u, g.jobs);
  if (jobs == 1 || targets.size() == 1) {
    for (std::size_t i = 0; i < targets.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned t = 0; t < std::min<std::size_t>(jobs, targets.size()); ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < targets.size();
             i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  const fs::path dir = g.out;
  fs::create_directories(dir);
  std::ostringstream eval_body;
  write_eval_csv(runs, eval_body);
  write_file(dir / "eval.csv", eval_body.str());
  manifest.add_output(dir / "eval.csv");
  for (const auto& run : runs) {
    const std::string stem = std::string(target_name(run.config.target)) + "-w" +
                             std::to_string(run.smoothing_window);
    std::ostringstream model_body, pred_body;
    save_model(run, model_body);
    write_file(dir / ("model-" + stem + ".txt"), model_body.str());
    write_overlay_csv(run, pred_body);
    write_file(dir / ("pred-" + stem + ".csv"), pred_body.str());
    write_file(dir / ("pred-" + stem + ".svg"), render_overlay_chart(run));
    manifest.add_output(dir / ("model-" + stem + ".txt"));
    manifest.add_output(dir / ("pred-" + stem + ".csv"));
    manifest.add_output(dir / ("pred-" + stem + ".svg"));
    std::cout << target_name(run.config.target) << " w" << run.smoothing_window
              << ": test_rmse=" << run.eval.test_rmse
              << " relative=" << run.eval.relative_rmse << "\n";
  }
  manifest.write(dir / "manifest.json");
  return kExitOk;
}

int cmd_report(int argc, char** argv, const GlobalOpts& g,
               const std::string& bins_path,
               const std::vector<std::string>& pred_paths,
               const std::string& eval_path, const std::string& sim_report_path) {
  if (g.out.empty()) throw ConfigError("report: --out is required");

  std::ifstream bins_in(bins_path, std::ios::binary);
  if (!bins_in) throw ConfigError("cannot open " + bins_path);
  std::vector<BinFeatures> bins;
  try {
    bins = read_bins_csv(bins_in);
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  if (bins.empty()) throw ConfigError("report: " + bins_path + " has no bins");

  ManifestBuilder manifest(argc, argv, g.seed);
  const fs::path dir = g.out;
  fs::create_directories(dir);

  write_file(dir / "rate.svg", render_rate_chart(bins));
  std::ostringstream rate_csv;
  write_rate_csv(bins, rate_csv);
  write_file(dir / "rate.csv", rate_csv.str());
  write_file(dir / "volume.svg", render_volume_chart(bins));
  std::ostringstream volume_csv;
  write_volume_csv(bins, volume_csv);
  write_file(dir / "volume.csv", volume_csv.str());
  for (const char* name : {"rate.svg", "rate.csv", "volume.svg", "volume.csv"})
    manifest.add_output(dir / name);

  for (const auto& pred_path : pred_paths) {
    std::ifstream in(pred_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + pred_path);
    CsvReader reader(in);
    std::vector<std::string> fields;
    std::vector<TimeMs> xs;
    std::vector<double> actual, predicted;
    bool saw_header = false;
    while (reader.next_record(fields)) {
      if (!saw_header) {
        saw_header = true;
        if (fields != std::vector<std::string>{"bin_start", "actual",
                                               "predicted"})
          throw ConfigError("report: " + pred_path +
                            " does not look like a predictions csv");
        continue;
      }
      if (fields.size() != 3)
        throw ConfigError("report: bad row in " + pred_path);
      auto ts = parse_rfc3339(fields[0]);
      auto a = detail::parse_double(fields[1]);
      auto p = detail::parse_double(fields[2]);
      if (!ts || !a || !p)
        throw ConfigError("report: bad row in " + pred_path);
      xs.push_back(*ts);
      actual.push_back(*a);
      predicted.push_back(*p);
    }
    const std::string stem = fs::path(pred_path).stem().string();
    write_file(dir / (stem + "-overlay.svg"),
               render_overlay_chart(stem, xs, actual, predicted));
    manifest.add_output(dir / (stem + "-overlay.svg"));
  }

  std::vector<EvalRow> eval_rows;
  if (!eval_path.empty()) {
    std::ifstream in(eval_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + eval_path);
    eval_rows = read_eval_csv(in);
  }

  SummaryStats stats;
  if (!sim_report_path.empty()) {
    auto j = load_config(sim_report_path);
    const auto& s = detail::json_require(j, "summary", "simulation report");
    stats.total_accesses = detail::json_u64(s, "total_accesses", "report");
    stats.total_hits = detail::json_u64(s, "total_hits", "report");
    stats.total_misses = detail::json_u64(s, "total_misses", "report");
    stats.hit_bytes = detail::json_u64(s, "hit_bytes", "report");
    stats.miss_bytes = detail::json_u64(s, "miss_bytes", "report");
    stats.file_hit_rate = detail::json_double(s, "file_hit_rate", "report");
    stats.byte_hit_rate = detail::json_double(s, "byte_hit_rate", "report");
  } else {
    stats = stats_from_bins(bins);
  }
  std::ostringstream md;
  write_summary_markdown(stats, eval_rows, md);
  write_file(dir / "summary.md", md.str());
  manifest.add_output(dir / "summary.md");
  manifest.write(dir / "manifest.json");
  std::cout << "report written to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_calibrate(int argc, char** argv, const GlobalOpts& g,
                  const std::string& federation_path, double file_hit,
                  double byte_hit, std::uint64_t budget) {
  if (g.config.empty()) throw ConfigError("calibrate: --config is required");
  if (g.out.empty()) throw ConfigError("calibrate: --out is required");
  auto base = workload_from_json(load_config(g.config));
  auto federation = federation_from_json(load_config(federation_path));
  if (g.seed_set) base.rng_seed = g.seed;

  ManifestBuilder manifest(argc, argv, base.rng_seed);
  manifest.add_config(g.config);
  manifest.add_config(federation_path);

  SummaryStats targets;
  targets.file_hit_rate = file_hit;
  targets.byte_hit_rate = byte_hit;
  const auto result = calibrate(targets, base, federation, budget);

  write_file(g.out, workload_to_json(result.spec).dump(2) + "\n");
  manifest.add_output(g.out);
  manifest.write(g.out + ".manifest.json");
  nlohmann::json summary{{"achieved_file_hit_rate", result.achieved_file_hit_rate},
                         {"achieved_byte_hit_rate", result.achieved_byte_hit_rate},
                         {"objective", result.objective},
                         {"evaluations", result.evaluations},
                         {"budget_exhausted", result.budget_exhausted}};
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cachecast: federated cache simulation and forecasting"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  auto* seed_opt = app.add_option("--seed", g.seed, "RNG seed override")
                       ->envname("CACHECAST_SEED");
  app.add_option("--config", g.config, "primary config file")
      ->envname("CACHECAST_CONFIG");
  app.add_option("--out", g.out, "output file or directory")
      ->envname("CACHECAST_OUT");
  app.add_option("--jobs", g.jobs, "parallel independent runs")
      ->envname("CACHECAST_JOBS");

  auto* generate_cmd = app.add_subcommand("generate", "synthesize a request trace");
  std::string format_name;
  generate_cmd->add_option("--format", format_name, "trace format")
      ->check(CLI::IsMember({"jsonl", "csv"}));

  auto* simulate_cmd = app.add_subcommand("simulate", "replay a trace against a federation");
  std::string trace_path, report_path;
  simulate_cmd->add_option("--trace", trace_path, "request trace")->required();
  simulate_cmd->add_option("--report", report_path, "simulation report path");

  auto* aggregate_cmd = app.add_subcommand("aggregate", "bin a resolved trace");
  std::string agg_trace, granularity_str = "hourly";
  aggregate_cmd->add_option("--trace", agg_trace, "resolved trace")->required();
  aggregate_cmd->add_option("--granularity", granularity_str, "hourly or daily")
      ->check(CLI::IsMember({"hourly", "daily"}));

  auto* forecast_cmd = app.add_subcommand("forecast", "train and evaluate the forecaster");
  std::string bins_path, target_str;
  std::size_t smooth = 1;
  forecast_cmd->add_option("--bins", bins_path, "bins csv")->required();
  forecast_cmd->add_option("--target", target_str, "target series or 'all'");
  forecast_cmd->add_option("--smooth", smooth, "moving-average window");

  auto* report_cmd = app.add_subcommand("report", "emit charts and a summary");
  std::string report_bins, eval_path, sim_report_path;
  std::vector<std::string> pred_paths;
  report_cmd->add_option("--bins", report_bins, "bins csv")->required();
  report_cmd->add_option("--pred", pred_paths, "prediction csv(s)");
  report_cmd->add_option("--eval", eval_path, "evaluation csv");
  report_cmd->add_option("--sim-report", sim_report_path, "simulation report json");

  auto* calibrate_cmd = app.add_subcommand("calibrate", "tune workload reuse knobs");
  std::string federation_path;
  double file_hit = 0.676, byte_hit = 0.354;
  std::uint64_t budget = 200;
  calibrate_cmd->add_option("--federation", federation_path, "federation config")
      ->required();
  calibrate_cmd->add_option("--file-hit", file_hit, "target file hit rate");
  calibrate_cmd->add_option("--byte-hit", byte_hit, "target byte hit rate");
  calibrate_cmd->add_option("--budget", budget, "simulate evaluations allowed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*generate_cmd) return cmd_generate(argc, argv, g, format_name);
    if (*simulate_cmd) return cmd_simulate(argc, argv, g, trace_path, report_path);
    if (*aggregate_cmd) return cmd_aggregate(argc, argv, g, agg_trace, granularity_str);
    if (*forecast_cmd) return cmd_forecast(argc, argv, g, bins_path, target_str, smooth);
    if (*report_cmd) return cmd_report(argc, argv, g, report_bins, pred_paths, eval_path, sim_report_path);
    if (*calibrate_cmd) return cmd_calibrate(argc, argv, g, federation_path, file_hit, byte_hit, budget);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const AggregateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const SimulateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind == SimulateError::Kind::UnmappedClass ? kExitConfig
                                                        : kExitData;
  } catch (const ForecastError& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind) {
      case ForecastError::Kind::SeriesTooShort:
      case ForecastError::Kind::NonContiguousBins:
      case ForecastError::Kind::NonFiniteData:
      case ForecastError::Kind::EmptySplit:
        return kExitData;
      default:
        return kExitDiverged;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  }
  return kExitConfig;
}
