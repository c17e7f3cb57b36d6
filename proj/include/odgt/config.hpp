#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "odgt/engine.hpp"
#include "odgt/network.hpp"
#include "odgt/problem.hpp"

// Experiment configuration: one JSON document with five sections (problem,
// schedule, run, metrics, output).  Every key has a default, so "{}" is a
// complete config; unknown keys are rejected to catch typos.  The same
// structs serialize back to JSON for run manifests, and a manifest re-parses
// to an identical config.

namespace odgt {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// problem.family = example1 | quadratic_synthetic | target_surrounding.
// Unused fields are ignored by families that do not need them.
struct ProblemConfig {
  std::string family = "example1";
  std::int64_t horizon = 1000;
  int agents = 2;           // quadratic_synthetic, target_surrounding
  int dim = 2;              // target_surrounding decision dimension
  double drift_rate = 1.0;  // quadratic_synthetic minimizer drift
  std::uint64_t seed = 1;   // quadratic_synthetic parameter draw
  std::string smoothing = "huber";  // target_surrounding: huber | none
  double eps = 1e-3;                // huber knee
  double cap = 50.0;                // target_surrounding norm cap
};

// schedule.kind = static | cyclic | q_cyclic | generated.  Static takes
// either an undirected edge list (Metropolis weights) or one explicit
// matrix; cyclic takes a list of matrices rotated each round.  min_weight 0
// means "derive from the graphs".
struct ScheduleConfig {
  std::string kind = "q_cyclic";
  int window = 1;           // rounds whose union must be strongly connected
  double min_weight = 0.0;  // declared positive-entry floor; 0 = derived
  std::uint64_t seed = 1;   // q_cyclic chord deal / generated stream
  double extra_edge_prob = 0.3;  // generated: chance of each extra edge
  std::vector<std::pair<int, int>> edges;
  std::vector<Matrix> matrices;
};

struct RunSection {
  std::string algorithm = "odgt";  // odgt | odgt_stochastic | centralized_pgd
  std::string stepsize = "diminishing";  // diminishing | constant
  double alpha = 0.0;                    // constant stepsize value
  std::int64_t horizon = 0;              // 0 = the problem's horizon
  std::uint64_t seed = 0;
  double sigma1_sq = 0.1;  // gradient-oracle noise variances (stochastic runs)
  double sigma2_sq = 0.1;
  std::string record = "full";  // full | summary
  bool strict_schedule = true;
};

struct MetricsSection {
  std::vector<std::string> measures = {"regret", "pathvar", "gradvar",
                                       "residuals"};
  std::vector<std::uint64_t> seeds;  // expectation estimates / run fan-out
  int variation_samples = 256;       // budget when no analytic grad2 shift
};

struct OutputSection {
  std::string directory;  // empty = --out flag, then ODGT_OUT_DIR, then ./odgt-out
  std::vector<std::string> formats = {"csv", "jsonl"};
};

struct ExperimentConfig {
  ProblemConfig problem;
  ScheduleConfig schedule;
  RunSection run;
  MetricsSection metrics;
  OutputSection output;
};

// ---------------------------------------------------------------------------
// Enum spellings.

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "odgt") return Algorithm::odgt;
  if (s == "odgt_stochastic" || s == "odgt-stochastic")
    return Algorithm::odgt_stochastic;
  if (s == "centralized_pgd" || s == "centralized")
    return Algorithm::centralized_pgd;
  throw ConfigError("unknown algorithm \"" + s + "\"");
}

inline RecordLevel record_level_from_string(const std::string& s) {
  if (s == "full") return RecordLevel::full;
  if (s == "summary") return RecordLevel::summary;
  throw ConfigError("unknown record level \"" + s + "\"");
}

inline std::string to_string(RecordLevel level) {
  return level == RecordLevel::full ? "full" : "summary";
}

inline Smoothing smoothing_from_string(const std::string& s) {
  if (s == "huber") return Smoothing::huber;
  if (s == "none") return Smoothing::none;
  throw ConfigError("unknown smoothing \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

inline void reject_unknown_keys(const Json& obj, const char* section,
                                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError(std::string(section) + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* name : allowed)
      if (item.key() == name) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown key \"" + item.key() + "\" in " + section);
  }
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

inline Matrix matrix_from_json(const Json& rows, const char* context) {
  if (!rows.is_array() || rows.empty())
    throw ConfigError(std::string(context) + ": matrix must be a nonempty array of rows");
  const auto n = rows.size();
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (!rows[r].is_array() || rows[r].size() != n)
      throw ConfigError(std::string(context) + ": matrix rows must be square");
    for (std::size_t c = 0; c < n; ++c) {
      if (!rows[r][c].is_number())
        throw ConfigError(std::string(context) + ": matrix entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c].get<double>();
    }
  }
  return m;
}

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline ProblemConfig parse_problem_config(const Json& obj) {
  detail::reject_unknown_keys(obj, "problem",
                              {"family", "horizon", "agents", "dim",
                               "drift_rate", "seed", "smoothing", "eps", "cap"});
  ProblemConfig pc;
  pc.family = detail::get_or<std::string>(obj, "family", pc.family);
  if (pc.family != "example1" && pc.family != "quadratic_synthetic" &&
      pc.family != "target_surrounding")
    throw ConfigError("unknown problem family \"" + pc.family + "\"");
  pc.horizon = detail::get_or<std::int64_t>(obj, "horizon", pc.horizon);
  if (pc.horizon < 1) throw ConfigError("problem.horizon must be at least 1");
  pc.agents = detail::get_or<int>(obj, "agents", pc.agents);
  if (pc.agents < 1) throw ConfigError("problem.agents must be at least 1");
  pc.dim = detail::get_or<int>(obj, "dim", pc.dim);
  if (pc.dim < 1) throw ConfigError("problem.dim must be at least 1");
  pc.drift_rate = detail::get_or<double>(obj, "drift_rate", pc.drift_rate);
  if (pc.drift_rate < 0.0) throw ConfigError("problem.drift_rate must be >= 0");
  pc.seed = detail::get_or<std::uint64_t>(obj, "seed", pc.seed);
  pc.smoothing = detail::get_or<std::string>(obj, "smoothing", pc.smoothing);
  smoothing_from_string(pc.smoothing);
  pc.eps = detail::get_or<double>(obj, "eps", pc.eps);
  if (!(pc.eps > 0.0)) throw ConfigError("problem.eps must be positive");
  pc.cap = detail::get_or<double>(obj, "cap", pc.cap);
  if (!(pc.cap > 0.0)) throw ConfigError("problem.cap must be positive");
  if (pc.family == "example1" && pc.agents != 2)
    throw ConfigError("example1 is a two-agent problem");
  return pc;
}

inline ScheduleConfig parse_schedule_config(const Json& obj) {
  detail::reject_unknown_keys(obj, "schedule",
                              {"kind", "window", "min_weight", "seed",
                               "extra_edge_prob", "edges", "matrices"});
  ScheduleConfig sc;
  sc.kind = detail::get_or<std::string>(obj, "kind", sc.kind);
  if (sc.kind != "static" && sc.kind != "cyclic" && sc.kind != "q_cyclic" &&
      sc.kind != "generated")
    throw ConfigError("unknown schedule kind \"" + sc.kind + "\"");
  sc.window = detail::get_or<int>(obj, "window", sc.window);
  if (sc.window < 1) throw ConfigError("schedule.window must be at least 1");
  sc.min_weight = detail::get_or<double>(obj, "min_weight", sc.min_weight);
  if (sc.min_weight < 0.0 || sc.min_weight >= 1.0)
    throw ConfigError("schedule.min_weight must lie in [0, 1)");
  sc.seed = detail::get_or<std::uint64_t>(obj, "seed", sc.seed);
  sc.extra_edge_prob =
      detail::get_or<double>(obj, "extra_edge_prob", sc.extra_edge_prob);
  if (sc.extra_edge_prob < 0.0 || sc.extra_edge_prob > 1.0)
    throw ConfigError("schedule.extra_edge_prob must lie in [0, 1]");
  if (obj.contains("edges")) {
    const Json& edges = obj.at("edges");
    if (!edges.is_array()) throw ConfigError("schedule.edges must be an array");
    for (const auto& e : edges) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer())
        throw ConfigError("schedule.edges entries must be [i, j] pairs");
      sc.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  if (obj.contains("matrices")) {
    const Json& mats = obj.at("matrices");
    if (!mats.is_array())
      throw ConfigError("schedule.matrices must be an array of matrices");
    for (const auto& m : mats)
      sc.matrices.push_back(detail::matrix_from_json(m, "schedule.matrices"));
  }
  if (sc.kind == "static" && sc.edges.empty() && sc.matrices.empty())
    throw ConfigError("a static schedule needs edges or one matrix");
  if (sc.kind == "static" && sc.matrices.size() > 1)
    throw ConfigError("a static schedule takes exactly one matrix");
  if (sc.kind == "cyclic" && sc.matrices.empty())
    throw ConfigError("a cyclic schedule needs matrices");
  return sc;
}

inline RunSection parse_run_section(const Json& obj) {
  detail::reject_unknown_keys(obj, "run",
                              {"algorithm", "stepsize", "alpha", "horizon",
                               "seed", "sigma1_sq", "sigma2_sq", "record",
                               "strict_schedule"});
  RunSection rc;
  rc.algorithm = detail::get_or<std::string>(obj, "algorithm", rc.algorithm);
  algorithm_from_string(rc.algorithm);
  rc.stepsize = detail::get_or<std::string>(obj, "stepsize", rc.stepsize);
  if (rc.stepsize != "diminishing" && rc.stepsize != "constant")
    throw ConfigError("unknown stepsize \"" + rc.stepsize + "\"");
  rc.alpha = detail::get_or<double>(obj, "alpha", rc.alpha);
  if (rc.stepsize == "constant" && !(rc.alpha > 0.0))
    throw ConfigError("a constant stepsize needs alpha > 0");
  rc.horizon = detail::get_or<std::int64_t>(obj, "horizon", rc.horizon);
  if (rc.horizon < 0) throw ConfigError("run.horizon must be >= 0");
  rc.seed = detail::get_or<std::uint64_t>(obj, "seed", rc.seed);
  rc.sigma1_sq = detail::get_or<double>(obj, "sigma1_sq", rc.sigma1_sq);
  rc.sigma2_sq = detail::get_or<double>(obj, "sigma2_sq", rc.sigma2_sq);
  if (rc.sigma1_sq < 0.0 || rc.sigma2_sq < 0.0)
    throw ConfigError("noise variances must be >= 0");
  rc.record = detail::get_or<std::string>(obj, "record", rc.record);
  record_level_from_string(rc.record);
  rc.strict_schedule =
      detail::get_or<bool>(obj, "strict_schedule", rc.strict_schedule);
  return rc;
}

inline MetricsSection parse_metrics_section(const Json& obj) {
  detail::reject_unknown_keys(obj, "metrics",
                              {"measures", "seeds", "variation_samples"});
  MetricsSection mc;
  if (obj.contains("measures")) {
    mc.measures.clear();
    for (const auto& m : obj.at("measures")) {
      const std::string name = m.get<std::string>();
      if (name != "regret" && name != "pathvar" && name != "gradvar" &&
          name != "residuals")
        throw ConfigError("unknown measure \"" + name + "\"");
      mc.measures.push_back(name);
    }
  }
  if (obj.contains("seeds")) {
    for (const auto& s : obj.at("seeds")) {
      if (!s.is_number_integer() && !s.is_number_unsigned())
        throw ConfigError("metrics.seeds must be unsigned integers");
      mc.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  mc.variation_samples =
      detail::get_or<int>(obj, "variation_samples", mc.variation_samples);
  if (mc.variation_samples < 0)
    throw ConfigError("metrics.variation_samples must be >= 0");
  return mc;
}

inline OutputSection parse_output_section(const Json& obj) {
  detail::reject_unknown_keys(obj, "output", {"directory", "formats"});
  OutputSection oc;
  oc.directory = detail::get_or<std::string>(obj, "directory", oc.directory);
  if (obj.contains("formats")) {
    oc.formats.clear();
    for (const auto& f : obj.at("formats")) {
      const std::string name = f.get<std::string>();
      if (name != "csv" && name != "jsonl")
        throw ConfigError("unknown output format \"" + name + "\"");
      oc.formats.push_back(name);
    }
  }
  return oc;
}

inline ExperimentConfig parse_experiment_config(const Json& root) {
  detail::reject_unknown_keys(root, "config",
                              {"problem", "schedule", "run", "metrics", "output"});
  ExperimentConfig config;
  config.problem = parse_problem_config(root.value("problem", Json::object()));
  config.schedule = parse_schedule_config(root.value("schedule", Json::object()));
  config.run = parse_run_section(root.value("run", Json::object()));
  config.metrics = parse_metrics_section(root.value("metrics", Json::object()));
  config.output = parse_output_section(root.value("output", Json::object()));
  return config;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json root;
  try {
    in >> root;
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return parse_experiment_config(root);
}

// ---------------------------------------------------------------------------
// Serialization (the resolved config embedded in run manifests).

inline Json experiment_config_to_json(const ExperimentConfig& config) {
  Json problem{{"family", config.problem.family},
               {"horizon", config.problem.horizon},
               {"agents", config.problem.agents},
               {"dim", config.problem.dim},
               {"drift_rate", config.problem.drift_rate},
               {"seed", config.problem.seed},
               {"smoothing", config.problem.smoothing},
               {"eps", config.problem.eps},
               {"cap", config.problem.cap}};
  Json schedule{{"kind", config.schedule.kind},
                {"window", config.schedule.window},
                {"min_weight", config.schedule.min_weight},
                {"seed", config.schedule.seed},
                {"extra_edge_prob", config.schedule.extra_edge_prob}};
  if (!config.schedule.edges.empty()) {
    Json edges = Json::array();
    for (const auto& [i, j] : config.schedule.edges)
      edges.push_back(Json::array({i, j}));
    schedule["edges"] = std::move(edges);
  }
  if (!config.schedule.matrices.empty()) {
    Json mats = Json::array();
    for (const auto& m : config.schedule.matrices)
      mats.push_back(detail::matrix_to_json(m));
    schedule["matrices"] = std::move(mats);
  }
  Json run{{"algorithm", config.run.algorithm},
           {"stepsize", config.run.stepsize},
           {"alpha", config.run.alpha},
           {"horizon", config.run.horizon},
           {"seed", config.run.seed},
           {"sigma1_sq", config.run.sigma1_sq},
           {"sigma2_sq", config.run.sigma2_sq},
           {"record", config.run.record},
           {"strict_schedule", config.run.strict_schedule}};
  Json metrics{{"measures", config.metrics.measures},
               {"variation_samples", config.metrics.variation_samples}};
  if (!config.metrics.seeds.empty()) metrics["seeds"] = config.metrics.seeds;
  Json output{{"formats", config.output.formats}};
  if (!config.output.directory.empty())
    output["directory"] = config.output.directory;
  return Json{{"problem", std::move(problem)},
              {"schedule", std::move(schedule)},
              {"run", std::move(run)},
              {"metrics", std::move(metrics)},
              {"output", std::move(output)}};
}

// ---------------------------------------------------------------------------
// Builders for the run-facing pieces.

inline GraphSchedule build_schedule(const ScheduleConfig& sc, int num_agents) {
  const auto derived_min = [](const std::vector<Matrix>& mats) {
    double lo = 1.0;
    for (const auto& m : mats)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          if (m(r, c) > 0.0) lo = std::min(lo, m(r, c));
    return lo;
  };

  if (sc.kind == "q_cyclic")
    return make_q_cyclic_schedule(num_agents, sc.window, sc.seed);
  if (sc.kind == "generated")
    return GraphSchedule::generated(num_agents, sc.seed, sc.extra_edge_prob);
  if (sc.kind == "static") {
    Matrix weights;
    if (!sc.matrices.empty()) {
      weights = sc.matrices.front();
    } else {
      weights = metropolis_weights(num_agents, sc.edges).weights;
    }
    if (weights.rows() != num_agents)
      throw ConfigError("schedule matrix size does not match the agent count");
    const double a =
        sc.min_weight > 0.0 ? sc.min_weight : derived_min({weights});
    return GraphSchedule::static_graph(make_digraph(weights), a, sc.window);
  }
  std::vector<WeightedDigraph> graphs;
  for (const auto& m : sc.matrices) {
    if (m.rows() != num_agents)
      throw ConfigError("schedule matrix size does not match the agent count");
    graphs.push_back(make_digraph(m));
  }
  const double a =
      sc.min_weight > 0.0 ? sc.min_weight : derived_min(sc.matrices);
  return GraphSchedule::cyclic(std::move(graphs), a, sc.window);
}

inline RunConfig build_run_config(const RunSection& rc) {
  RunConfig config;
  config.algorithm = algorithm_from_string(rc.algorithm);
  config.stepsize = rc.stepsize == "diminishing"
                        ? StepsizeSchedule::diminishing()
                        : StepsizeSchedule::constant(rc.alpha);
  config.horizon = rc.horizon;
  config.seed = rc.seed;
  config.noise = {std::sqrt(rc.sigma1_sq), std::sqrt(rc.sigma2_sq)};
  config.record = record_level_from_string(rc.record);
  config.strict_schedule = rc.strict_schedule;
  return config;
}

}  // namespace odgt
