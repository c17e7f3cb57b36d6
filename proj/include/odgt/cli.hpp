#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "odgt/config.hpp"
#include "odgt/experiments.hpp"
#include "odgt/metrics.hpp"
#include "odgt/trace_io.hpp"

// Command-line front end.
//
//   odgt run      --config c.json [--seed N] [--steps N] [--algorithm A]
//                 [--stepsize diminishing|constant[:ALPHA]] [--record L]
//                 [--out DIR]
//   odgt validate --config c.json [--window K]
//   odgt metrics  --trace trace.jsonl [--measures m1,m2] [--out DIR]
//                 [--expect-over-seeds]
//
// Exit codes: 0 success (validate: schedule passed), 1 failed validation or
// internal error, 2 bad config / bad trace / bad flags, 3 schedule rejected
// by a strict run, 4 non-finite state.

namespace odgt {

namespace detail {

inline std::pair<double, double> mean_se(const std::vector<double>& values) {
  const auto n = values.size();
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double var = 0.0;
  for (const double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(n - 1) /
                          static_cast<double>(n))};
}

inline std::string resolve_out_dir(const std::string& flag,
                                   const ExperimentConfig& config) {
  if (!flag.empty()) return flag;
  if (!config.output.directory.empty()) return config.output.directory;
  if (const char* env = std::getenv("ODGT_OUT_DIR"); env && *env) return env;
  return "odgt-out";
}

inline int default_solver_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

inline void write_json_file(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw TraceError("failed while writing " + path.string());
}

inline void write_run_outputs(const std::filesystem::path& dir,
                              const ExperimentConfig& config,
                              const ProblemSpec& spec,
                              const GraphSchedule& schedule,
                              const RunTrace& trace) {
  std::filesystem::create_directories(dir);
  const Json manifest = make_manifest(config, spec, schedule, trace);
  write_json_file(dir / "manifest.json", manifest);
  std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
  for (const std::string& format : config.output.formats) {
    if (format == "csv") {
      write_trace_csv((dir / "trace.csv").string(), trace, manifest);
      std::cout << "wrote " << (dir / "trace.csv").string() << "\n";
    } else {
      write_trace_jsonl((dir / "trace.jsonl").string(), trace, manifest);
      std::cout << "wrote " << (dir / "trace.jsonl").string() << "\n";
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// run

struct RunFlags {
  std::string config_path;
  std::string out_dir;
  std::string algorithm;
  std::string stepsize;
  std::string record;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  bool seed_given = false;
  bool steps_given = false;
};

inline int cmd_run(const RunFlags& flags) {
  ExperimentConfig config = load_experiment_config(flags.config_path);
  if (flags.seed_given) config.run.seed = flags.seed;
  if (flags.steps_given) config.run.horizon = flags.steps;
  if (!flags.algorithm.empty()) config.run.algorithm = flags.algorithm;
  if (!flags.record.empty()) config.run.record = flags.record;
  if (!flags.stepsize.empty()) {
    const auto colon = flags.stepsize.find(':');
    config.run.stepsize = flags.stepsize.substr(0, colon);
    if (colon != std::string::npos) {
      try {
        config.run.alpha = std::stod(flags.stepsize.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad stepsize \"" + flags.stepsize + "\"");
      }
    }
    if (config.run.stepsize != "diminishing" && config.run.stepsize != "constant")
      throw ConfigError("unknown stepsize \"" + config.run.stepsize + "\"");
    if (config.run.stepsize == "constant" && !(config.run.alpha > 0.0))
      throw ConfigError("a constant stepsize needs alpha > 0");
  }
  if (config.run.horizon > config.problem.horizon)
    throw ConfigError("run horizon exceeds the problem horizon");

  const ProblemSpec spec = build_problem(config.problem);
  const GraphSchedule schedule = build_schedule(config.schedule, spec.num_agents());
  const RunConfig run_config = build_run_config(config.run);
  const std::filesystem::path out =
      detail::resolve_out_dir(flags.out_dir, config);

  const bool fan_out = run_config.algorithm == Algorithm::odgt_stochastic &&
                       config.metrics.seeds.size() > 1 && !flags.seed_given;
  if (!fan_out) {
    const RunTrace trace = run(spec, schedule, run_config);
    for (const std::string& w : trace.warnings)
      std::cout << "warning: " << w << "\n";
    std::cout << "ran " << to_string(trace.algorithm) << " on "
              << spec.losses->name() << ": " << trace.horizon << " rounds, "
              << spec.num_agents() << " agents, seed " << trace.seed << "\n";
    const TraceRecord& last = trace.records.back();
    std::cout << "final loss " << last.loss << "  consensus residuals nu "
              << last.nu_residual << " y " << last.y_residual << "\n";
    detail::write_run_outputs(out, config, spec, schedule, trace);
    return 0;
  }

  // One run per configured seed, written to seed_<s>/ plus a summary report.
  const std::vector<std::uint64_t> seeds = config.metrics.seeds;
  std::vector<std::future<RunTrace>> jobs;
  jobs.reserve(seeds.size());
  for (const std::uint64_t seed : seeds) {
    RunConfig seeded = run_config;
    seeded.seed = seed;
    jobs.push_back(std::async(std::launch::async, [&spec, &schedule, seeded] {
      return run(spec, schedule, seeded);
    }));
  }
  std::vector<double> final_losses;
  Json directories = Json::array();
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const RunTrace trace = jobs[k].get();
    for (const std::string& w : trace.warnings)
      std::cout << "warning: " << w << "\n";
    ExperimentConfig seeded_config = config;
    seeded_config.run.seed = seeds[k];
    const std::string leaf = "seed_" + std::to_string(seeds[k]);
    detail::write_run_outputs(out / leaf, seeded_config, spec, schedule, trace);
    final_losses.push_back(trace.records.back().loss);
    directories.push_back(leaf);
    std::cout << "seed " << seeds[k] << ": final loss "
              << trace.records.back().loss << "\n";
  }
  const auto [mean, se] = detail::mean_se(final_losses);
  detail::write_json_file(out / "report.json",
                          Json{{"type", "run-fanout"},
                               {"seeds", seeds},
                               {"directories", directories},
                               {"final_losses", final_losses},
                               {"mean_final_loss", mean},
                               {"se_final_loss", se}});
  std::cout << "mean final loss " << mean << " (se " << se << ") over "
            << seeds.size() << " seeds\n";
  std::cout << "wrote " << (out / "report.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// validate

inline int cmd_validate(const std::string& config_path, std::int64_t window) {
  const ExperimentConfig config = load_experiment_config(config_path);
  const ProblemSpec spec = build_problem(config.problem);
  const GraphSchedule schedule = build_schedule(config.schedule, spec.num_agents());
  if (window <= 0)
    window =
        config.run.horizon > 0 ? config.run.horizon : config.problem.horizon;

  const ValidationReport report = validate_schedule(schedule, window);
  std::cout << to_string(schedule.kind()) << " schedule on "
            << schedule.num_agents() << " agents, connectivity window "
            << schedule.connectivity_window() << ", declared min weight "
            << schedule.declared_min_weight() << "\n";
  std::cout << "doubly stochastic: " << (report.doubly_stochastic ? "ok" : "FAIL")
            << "\n";
  std::cout << "min weight:        " << (report.min_weight_ok ? "ok" : "FAIL")
            << "\n";
  std::cout << "joint connectivity: " << (report.jointly_connected ? "ok" : "FAIL")
            << "\n";
  for (const auto& issue : report.issues)
    std::cout << "  [" << issue.category << "] t=" << issue.t << ": "
              << issue.detail << "\n";
  std::cout << (report.passed() ? "PASS" : "FAIL") << " (" << window
            << " start times)\n";
  return report.passed() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// metrics

namespace detail {

inline std::vector<std::string> parse_measures(const std::string& flag,
                                               const Json& manifest) {
  std::vector<std::string> measures;
  if (flag.empty()) {
    for (const auto& m :
         manifest.at("config").at("metrics").at("measures"))
      measures.push_back(m.get<std::string>());
  } else {
    std::size_t pos = 0;
    while (pos <= flag.size()) {
      const auto comma = flag.find(',', pos);
      const auto end = comma == std::string::npos ? flag.size() : comma;
      if (end > pos) measures.push_back(flag.substr(pos, end - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  for (const auto& m : measures)
    if (m != "regret" && m != "pathvar" && m != "gradvar" && m != "residuals")
      throw ConfigError("unknown measure \"" + m + "\"");
  if (measures.empty()) throw ConfigError("no measures requested");
  return measures;
}

inline ExperimentConfig config_from_manifest(const Json& manifest,
                                             const std::string& path) {
  if (!manifest.contains("config"))
    throw TraceError("manifest in " + path + " has no resolved config");
  return parse_experiment_config(manifest.at("config"));
}

inline std::vector<double> played_alphas(const RunTrace& trace) {
  std::vector<double> alphas;
  alphas.reserve(static_cast<std::size_t>(trace.horizon));
  for (std::int64_t t = 0; t < trace.horizon; ++t)
    alphas.push_back(trace.records[static_cast<std::size_t>(t)].alpha);
  return alphas;
}

}  // namespace detail

inline int cmd_metrics(const std::string& trace_path,
                       const std::string& measures_flag,
                       const std::string& out_flag, bool expect_over_seeds) {
  namespace fs = std::filesystem;

  if (expect_over_seeds) {
    // trace_path is a fan-out directory: aggregate seed_*/trace.jsonl.
    std::vector<LoadedTrace> loads;
    std::vector<fs::path> files;
    if (!fs::is_directory(trace_path))
      throw TraceError(trace_path + " is not a fan-out directory");
    for (const auto& entry : fs::directory_iterator(trace_path)) {
      if (!entry.is_directory()) continue;
      if (entry.path().filename().string().rfind("seed_", 0) != 0) continue;
      const fs::path file = entry.path() / "trace.jsonl";
      if (fs::exists(file)) files.push_back(file);
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) loads.push_back(read_trace_jsonl(file.string()));
    if (loads.empty())
      throw TraceError("no seed_*/trace.jsonl under " + trace_path);
    std::sort(loads.begin(), loads.end(),
              [](const LoadedTrace& a, const LoadedTrace& b) {
                return a.trace.seed < b.trace.seed;
              });

    const ExperimentConfig config =
        detail::config_from_manifest(loads.front().manifest, trace_path);
    const ProblemSpec spec = build_problem(config.problem);
    const std::int64_t rounds = loads.front().trace.horizon;
    for (const auto& loaded : loads)
      if (loaded.trace.horizon != rounds)
        throw TraceError("seed traces under " + trace_path +
                         " have mismatched horizons");

    SolverConfig solver;
    solver.threads = detail::default_solver_threads();
    const auto [optima, stats] = solve_optima(spec, 0, rounds, solver);

    std::vector<std::uint64_t> seeds;
    std::vector<double> totals;
    std::vector<std::vector<double>> over_t;
    for (const auto& loaded : loads) {
      const RegretSeries series = dynamic_regret(spec, loaded.trace, optima);
      seeds.push_back(loaded.trace.seed);
      totals.push_back(series.total);
      over_t.push_back(series.over_t);
    }
    const auto [mean_total, se_total] = detail::mean_se(totals);
    std::vector<double> mean_over_t(static_cast<std::size_t>(rounds));
    std::vector<double> se_over_t(static_cast<std::size_t>(rounds));
    std::vector<double> column(loads.size());
    for (std::size_t t = 0; t < static_cast<std::size_t>(rounds); ++t) {
      for (std::size_t k = 0; k < loads.size(); ++k) column[k] = over_t[k][t];
      std::tie(mean_over_t[t], se_over_t[t]) = detail::mean_se(column);
    }

    const fs::path out = out_flag.empty() ? fs::path(trace_path) : fs::path(out_flag);
    fs::create_directories(out);
    {
      std::ofstream csv(out / "expected_regret.csv");
      if (!csv) throw TraceError("cannot open expected_regret.csv for writing");
      csv << "t,mean_over_t,se_over_t\n";
      for (std::size_t t = 0; t < mean_over_t.size(); ++t)
        csv << (t + 1) << "," << detail::format_double(mean_over_t[t]) << ","
            << detail::format_double(se_over_t[t]) << "\n";
    }
    detail::write_json_file(
        out / "report.json",
        Json{{"type", "expected-regret"},
             {"horizon", rounds},
             {"seeds", seeds},
             {"totals", totals},
             {"mean_total", mean_total},
             {"se_total", se_total},
             {"solver", Json{{"solves", stats.solves},
                             {"total_iterations", stats.total_iterations},
                             {"max_residual", stats.max_residual},
                             {"all_converged", stats.all_converged}}}});
    std::cout << "mean regret " << mean_total << " (se " << se_total
              << ") over " << seeds.size() << " seeds\n";
    std::cout << "wrote " << (out / "expected_regret.csv").string() << "\n";
    std::cout << "wrote " << (out / "report.json").string() << "\n";
    return 0;
  }

  const LoadedTrace loaded = read_trace_jsonl(trace_path);
  const RunTrace& trace = loaded.trace;
  const ExperimentConfig config =
      detail::config_from_manifest(loaded.manifest, trace_path);
  const ProblemSpec spec = build_problem(config.problem);
  const std::vector<std::string> measures =
      detail::parse_measures(measures_flag, loaded.manifest);
  const auto want = [&measures](const char* name) {
    return std::find(measures.begin(), measures.end(), name) != measures.end();
  };

  const fs::path out = out_flag.empty()
                           ? fs::path(trace_path).parent_path()
                           : fs::path(out_flag);
  if (!out.empty()) fs::create_directories(out);
  const std::int64_t rounds = trace.horizon;
  const std::vector<double> alphas = detail::played_alphas(trace);

  Json report{{"type", "metrics-report"},
              {"horizon", rounds},
              {"measures", measures}};
  std::vector<std::string> warnings;

  std::vector<InstantOptimum> optima;
  if (want("regret") || want("pathvar")) {
    SolverConfig solver;
    solver.threads = detail::default_solver_threads();
    SolverStats stats;
    std::tie(optima, stats) = solve_optima(spec, 0, rounds, solver);
    if (!stats.all_converged)
      warnings.push_back(
          "the per-round optimum solver hit its iteration cap; regret and "
          "path variation are computed against the best iterate found");
    report["solver"] = Json{{"solves", stats.solves},
                            {"total_iterations", stats.total_iterations},
                            {"max_residual", stats.max_residual},
                            {"all_converged", stats.all_converged}};
  }

  if (want("regret")) {
    const RegretSeries series = dynamic_regret(spec, trace, optima);
    report["regret"] = Json{{"total", series.total},
                            {"final_over_t", series.over_t.back()}};
    std::ofstream csv(out / "regret.csv");
    if (!csv) throw TraceError("cannot open regret.csv for writing");
    csv << "t,instant,cumulative,over_t\n";
    for (std::size_t k = 0; k < series.instant.size(); ++k)
      csv << k << "," << detail::format_double(series.instant[k]) << ","
          << detail::format_double(series.cumulative[k]) << ","
          << detail::format_double(series.over_t[k]) << "\n";
    std::cout << "regret " << series.total << " (R_T/T "
              << series.over_t.back() << ")\n";
    std::cout << "wrote " << (out / "regret.csv").string() << "\n";
  }

  if (want("pathvar")) {
    const double weighted = path_variation(optima, alphas);
    const double unit = path_variation(optima);
    report["path_variation"] = Json{{"weighted", weighted}, {"unit", unit}};
    std::cout << "path variation " << unit << " (stepsize-weighted "
              << weighted << ")\n";
  }

  if (want("gradvar")) {
    GradVariationConfig gv;
    gv.horizon = rounds;
    gv.samples = config.metrics.variation_samples;
    const GradVariation unit = gradient_variation(spec, GradWeighting::unit_sum, gv);
    gv.alphas = alphas;
    const GradVariation weighted =
        gradient_variation(spec, GradWeighting::alpha_weighted_square, gv);
    report["grad_variation"] = Json{{"unit_sum", unit.value},
                                    {"alpha_weighted_square", weighted.value},
                                    {"estimated", unit.estimated},
                                    {"restricted", unit.restricted}};
    std::cout << "gradient variation " << unit.value
              << (unit.estimated ? " (sampled lower estimate)" : "") << "\n";
  }

  if (want("residuals")) {
    const ResidualSeries series = tracking_residuals(trace);
    const auto max_nu = *std::max_element(series.nu.begin(), series.nu.end());
    const auto max_y = *std::max_element(series.y.begin(), series.y.end());
    report["residuals"] = Json{{"max_nu", max_nu},
                               {"max_y", max_y},
                               {"final_nu", series.nu.back()},
                               {"final_y", series.y.back()}};
    std::ofstream csv(out / "residuals.csv");
    if (!csv) throw TraceError("cannot open residuals.csv for writing");
    csv << "t,nu,y\n";
    for (std::size_t k = 0; k < series.nu.size(); ++k)
      csv << k << "," << detail::format_double(series.nu[k]) << ","
          << detail::format_double(series.y[k]) << "\n";
    std::cout << "max consensus residuals nu " << max_nu << " y " << max_y
              << "\n";
    std::cout << "wrote " << (out / "residuals.csv").string() << "\n";
  }

  report["warnings"] = warnings;
  for (const std::string& w : warnings) std::cout << "warning: " << w << "\n";
  detail::write_json_file(out / "report.json", report);
  std::cout << "wrote " << (out / "report.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// entry point

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"distributed online aggregative optimization simulator"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run_cmd =
      app.add_subcommand("run", "simulate a config and write trace files");
  run_cmd->add_option("--config", run_flags.config_path, "experiment config")
      ->required();
  CLI::Option* seed_opt =
      run_cmd->add_option("--seed", run_flags.seed, "override the run seed");
  CLI::Option* steps_opt =
      run_cmd->add_option("--steps", run_flags.steps, "override the horizon");
  run_cmd->add_option("--algorithm", run_flags.algorithm,
                      "odgt | odgt_stochastic | centralized_pgd");
  run_cmd->add_option("--stepsize", run_flags.stepsize,
                      "diminishing | constant[:ALPHA]");
  run_cmd->add_option("--record", run_flags.record, "full | summary");
  run_cmd->add_option("--out", run_flags.out_dir, "output directory");

  std::string validate_config;
  std::int64_t validate_window = 0;
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "check a schedule's mixing assumptions");
  validate_cmd->add_option("--config", validate_config, "experiment config")
      ->required();
  validate_cmd->add_option("--window", validate_window,
                           "start times to probe (default: the run horizon)");

  std::string metrics_trace;
  std::string metrics_measures;
  std::string metrics_out;
  bool expect_over_seeds = false;
  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "evaluate a written trace");
  metrics_cmd->add_option("--trace", metrics_trace,
                          "trace.jsonl, or a fan-out directory")
      ->required();
  metrics_cmd->add_option("--measures", metrics_measures,
                          "comma list: regret,pathvar,gradvar,residuals");
  metrics_cmd->add_option("--out", metrics_out, "output directory");
  metrics_cmd->add_flag("--expect-over-seeds", expect_over_seeds,
                        "aggregate regret across seed_*/ subdirectories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) {
      run_flags.seed_given = seed_opt->count() > 0;
      run_flags.steps_given = steps_opt->count() > 0;
      return cmd_run(run_flags);
    }
    if (validate_cmd->parsed()) return cmd_validate(validate_config, validate_window);
    return cmd_metrics(metrics_trace, metrics_measures, metrics_out,
                       expect_over_seeds);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TraceError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return 2;
  } catch (const ScheduleError& e) {
    std::cerr << "schedule error: " << e.what() << "\n";
    return 3;
  } catch (const NonFiniteError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("odgt");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace odgt
