#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "odgt/config.hpp"
#include "odgt/metrics.hpp"
#include "odgt/version.hpp"

// Trace persistence.  Two formats share one manifest (resolved config,
// schedule audit, declared constants, library version):
//
//   *.csv    one row per round, '#'-prefixed manifest header, %.17g floats —
//            lossless and ready for plotting tools;
//   *.jsonl  manifest object on the first line, then one record object per
//            round, then a final-state object — the round-trip format the
//            metrics tooling reads back.
//
// Nothing here embeds timestamps or hostnames: rerunning a config writes
// byte-identical files.

namespace odgt {

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Json blocks_to_json(const Blocks& blocks) {
  Json arr = Json::array();
  for (const auto& b : blocks) arr.push_back(vector_to_json(b));
  return arr;
}

inline Vector vector_from_json(const Json& arr, const char* context) {
  if (!arr.is_array())
    throw TraceError(std::string(context) + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw TraceError(std::string(context) + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

inline Blocks blocks_from_json(const Json& arr, const char* context) {
  if (!arr.is_array())
    throw TraceError(std::string(context) + ": expected an array of blocks");
  Blocks blocks;
  for (const auto& b : arr) blocks.push_back(vector_from_json(b, context));
  return blocks;
}

inline double finite_number(const Json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_number())
    throw TraceError(std::string("trace record is missing \"") + key + "\"");
  const double v = obj.at(key).get<double>();
  if (!std::isfinite(v))
    throw TraceError(std::string("non-finite \"") + key + "\" in trace record");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Manifest.

inline std::string to_string(GraphSchedule::Kind kind) {
  switch (kind) {
    case GraphSchedule::Kind::static_graph: return "static";
    case GraphSchedule::Kind::cyclic: return "cyclic";
    case GraphSchedule::Kind::generated: return "generated";
  }
  return "?";
}

inline Json schedule_audit(const GraphSchedule& schedule, std::int64_t window) {
  const ValidationReport report = validate_schedule(schedule, window);
  Json issues = Json::array();
  for (const auto& issue : report.issues)
    issues.push_back({{"category", issue.category},
                      {"t", issue.t},
                      {"detail", issue.detail}});
  return Json{{"kind", to_string(schedule.kind())},
              {"num_agents", schedule.num_agents()},
              {"declared_min_weight", schedule.declared_min_weight()},
              {"connectivity_window", schedule.connectivity_window()},
              {"period", schedule.period()},
              {"window_checked", window},
              {"validation", Json{{"passed", report.passed()},
                                  {"doubly_stochastic", report.doubly_stochastic},
                                  {"min_weight_ok", report.min_weight_ok},
                                  {"jointly_connected", report.jointly_connected},
                                  {"issues", std::move(issues)}}}};
}

inline Json make_manifest(const ExperimentConfig& config,
                          const ProblemSpec& spec,
                          const GraphSchedule& schedule,
                          const RunTrace& trace) {
  const LossConstants constants = spec.losses->constants();
  Json constants_json{{"grad_bound", constants.grad_bound},
                      {"estimated", constants.estimated}};
  if (std::isfinite(constants.grad2_smoothness))
    constants_json["grad2_smoothness"] = constants.grad2_smoothness;
  else
    constants_json["grad2_smoothness"] = "inf";
  if (trace.algorithm != Algorithm::centralized_pgd &&
      !trace.records.empty() && !trace.records.front().y.empty()) {
    const BoundConstants bc = compute_bound_constants(
        spec.num_agents(), schedule.declared_min_weight(),
        schedule.connectivity_window(), constants.grad_bound,
        trace.records.front().y);
    constants_json["bound"] =
        Json{{"gamma", bc.gamma},
             {"xi", bc.xi},
             {"b1", bc.b1},
             {"y_residual_cap", spec.num_agents() * bc.b1}};
  }
  return Json{
      {"format", "odgt-trace"},
      {"format_version", 1},
      {"library_version", version_string},
      {"config", experiment_config_to_json(config)},
      {"problem", Json{{"name", spec.losses->name()},
                       {"num_agents", spec.num_agents()},
                       {"agg_dim", spec.agg_dim()},
                       {"total_dim", spec.total_dim()},
                       {"horizon", spec.horizon}}},
      {"schedule_audit",
       schedule_audit(schedule, std::max<std::int64_t>(trace.horizon, 1))},
      {"constants", std::move(constants_json)},
      {"rng", Json{{"seed", trace.seed},
                   {"scheme", "counter(seed, round, agent, slot)"},
                   {"slots", Json{{"grad1", 0}, {"grad_psi", 1}, {"grad2", 2},
                                  {"init", 3}}}}},
      {"trace_header", Json{{"algorithm", to_string(trace.algorithm)},
                            {"record", to_string(trace.level)},
                            {"seed", trace.seed},
                            {"horizon", trace.horizon}}}};
}

// ---------------------------------------------------------------------------
// CSV.

inline void write_trace_csv(const std::string& path, const RunTrace& trace,
                            const Json& manifest) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot open " + path + " for writing");
  out << "# odgt-trace v1\n";
  out << "# manifest: " << manifest.dump() << "\n";

  const bool full = !trace.records.empty() && !trace.records.front().x.empty();
  out << "t,alpha,loss,nu_residual,y_residual";
  if (full) {
    const auto& first = trace.records.front();
    const auto emit_header = [&out](const char* tag, const Blocks& blocks) {
      for (std::size_t i = 0; i < blocks.size(); ++i)
        for (Eigen::Index c = 0; c < blocks[i].size(); ++c)
          out << "," << tag << i << "_" << c;
    };
    emit_header("x", first.x);
    emit_header("nu", first.nu);
    emit_header("y", first.y);
    emit_header("g2", first.grad2);
  }
  out << "\n";

  for (const auto& rec : trace.records) {
    out << rec.t << "," << detail::format_double(rec.alpha) << ","
        << detail::format_double(rec.loss) << ","
        << detail::format_double(rec.nu_residual) << ","
        << detail::format_double(rec.y_residual);
    if (full) {
      const auto emit_blocks = [&out](const Blocks& blocks) {
        for (const auto& b : blocks)
          for (Eigen::Index c = 0; c < b.size(); ++c)
            out << "," << detail::format_double(b[c]);
      };
      emit_blocks(rec.x);
      emit_blocks(rec.nu);
      emit_blocks(rec.y);
      emit_blocks(rec.grad2);
    }
    out << "\n";
  }
  if (!out) throw TraceError("failed while writing " + path);
}

// Two-column series, same '#'-manifest convention.
inline void write_series_csv(const std::string& path,
                             const std::string& value_name,
                             const std::vector<double>& values,
                             std::int64_t first_t = 0) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot open " + path + " for writing");
  out << "t," << value_name << "\n";
  for (std::size_t k = 0; k < values.size(); ++k)
    out << (first_t + static_cast<std::int64_t>(k)) << ","
        << detail::format_double(values[k]) << "\n";
  if (!out) throw TraceError("failed while writing " + path);
}

// ---------------------------------------------------------------------------
// JSONL.

inline void write_trace_jsonl(const std::string& path, const RunTrace& trace,
                              const Json& manifest) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot open " + path + " for writing");
  Json head = manifest;
  head["type"] = "manifest";
  out << head.dump() << "\n";
  for (const auto& rec : trace.records) {
    Json line{{"type", "record"},      {"t", rec.t},
              {"alpha", rec.alpha},    {"loss", rec.loss},
              {"nu_residual", rec.nu_residual},
              {"y_residual", rec.y_residual}};
    if (!rec.x.empty()) {
      line["x"] = detail::blocks_to_json(rec.x);
      line["nu"] = detail::blocks_to_json(rec.nu);
      line["y"] = detail::blocks_to_json(rec.y);
      line["grad2"] = detail::blocks_to_json(rec.grad2);
    }
    out << line.dump() << "\n";
  }
  Json tail{{"type", "final"},
            {"final_x", detail::blocks_to_json(trace.final_x)},
            {"warnings", trace.warnings}};
  out << tail.dump() << "\n";
  if (!out) throw TraceError("failed while writing " + path);
}

struct LoadedTrace {
  RunTrace trace;
  Json manifest;
};

inline LoadedTrace read_trace_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace " + path);
  std::string line;
  if (!std::getline(in, line))
    throw TraceError("trace " + path + " is empty");

  LoadedTrace loaded;
  try {
    loaded.manifest = Json::parse(line);
  } catch (const Json::exception& e) {
    throw TraceError("cannot parse manifest in " + path + ": " + e.what());
  }
  if (loaded.manifest.value("type", "") != "manifest" ||
      !loaded.manifest.contains("trace_header"))
    throw TraceError("trace " + path + " does not start with a manifest");

  const Json& header = loaded.manifest.at("trace_header");
  RunTrace& trace = loaded.trace;
  try {
    trace.algorithm = algorithm_from_string(header.at("algorithm").get<std::string>());
    trace.level = record_level_from_string(header.at("record").get<std::string>());
    trace.seed = header.at("seed").get<std::uint64_t>();
    trace.horizon = header.at("horizon").get<std::int64_t>();
  } catch (const Json::exception& e) {
    throw TraceError("bad trace header in " + path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw TraceError("bad trace header in " + path + ": " + e.what());
  }

  bool saw_final = false;
  std::int64_t expected_t = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json obj;
    try {
      obj = Json::parse(line);
    } catch (const Json::exception& e) {
      throw TraceError("cannot parse record in " + path + ": " + e.what());
    }
    const std::string type = obj.value("type", "");
    if (type == "final") {
      trace.final_x = detail::blocks_from_json(obj.value("final_x", Json::array()),
                                               "final_x");
      if (obj.contains("warnings"))
        for (const auto& w : obj.at("warnings"))
          trace.warnings.push_back(w.get<std::string>());
      saw_final = true;
      continue;
    }
    if (type != "record")
      throw TraceError("unexpected line type \"" + type + "\" in " + path);
    if (saw_final)
      throw TraceError("record after the final state in " + path);
    TraceRecord rec;
    rec.t = obj.value("t", std::int64_t{-1});
    if (rec.t != expected_t)
      throw TraceError("trace rounds are not consecutive in " + path);
    ++expected_t;
    rec.alpha = detail::finite_number(obj, "alpha");
    rec.loss = detail::finite_number(obj, "loss");
    rec.nu_residual = detail::finite_number(obj, "nu_residual");
    rec.y_residual = detail::finite_number(obj, "y_residual");
    if (obj.contains("x")) {
      rec.x = detail::blocks_from_json(obj.at("x"), "x");
      rec.nu = detail::blocks_from_json(obj.at("nu"), "nu");
      rec.y = detail::blocks_from_json(obj.at("y"), "y");
      rec.grad2 = detail::blocks_from_json(obj.at("grad2"), "grad2");
    }
    trace.records.push_back(std::move(rec));
  }
  if (!saw_final) throw TraceError("trace " + path + " has no final state");
  if (static_cast<std::int64_t>(trace.records.size()) != trace.horizon + 1)
    throw TraceError("trace " + path + " does not cover its declared horizon");
  return loaded;
}

}  // namespace odgt
