#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "odgt/network.hpp"
#include "odgt/problem.hpp"

// The online algorithms.  Each agent keeps a decision x_i constrained to its
// own set, a local estimate nu_i of the aggregate nu(x), and a tracker y_i of
// the average grad2 across agents.  One round:
//
//   x_i^+  = P_i[ x_i - alpha (grad1_i + Dpsi_i^T y_i) ]
//   nu_i^+ = sum_j a_ij nu_j + psi_i(x_i^+) - psi_i(x_i)
//   y_i^+  = sum_j a_ij y_j + grad2_i^+ - grad2_i
//
// The centralized projected-descent baseline evaluates the exact aggregate
// every round instead of tracking it.

namespace odgt {

// ---------------------------------------------------------------------------
// Stepsizes.

class StepsizeSchedule {
 public:
  enum class Kind { diminishing, constant };

  // alpha_0 = 1, alpha_t = 1/sqrt(t) afterwards.
  static StepsizeSchedule diminishing() { return StepsizeSchedule(); }

  static StepsizeSchedule constant(double alpha) {
    if (!(alpha > 0.0))
      throw std::invalid_argument("StepsizeSchedule: alpha must be positive");
    StepsizeSchedule s;
    s.kind_ = Kind::constant;
    s.alpha_ = alpha;
    return s;
  }

  // The horizon-aware constant sqrt((1 + path_variation) / (T + grad_variation)),
  // with both variations unit-weighted.
  static StepsizeSchedule constant_from_variations(double path_variation,
                                                   double grad_variation,
                                                   std::int64_t horizon) {
    if (path_variation < 0.0 || grad_variation < 0.0 || horizon < 1)
      throw std::invalid_argument("StepsizeSchedule: bad variation inputs");
    return constant(std::sqrt((1.0 + path_variation) /
                              (static_cast<double>(horizon) + grad_variation)));
  }

  Kind kind() const { return kind_; }
  double constant_alpha() const { return alpha_; }

  double at(std::int64_t t) const {
    if (t < 0) throw std::invalid_argument("StepsizeSchedule: negative round");
    if (kind_ == Kind::constant) return alpha_;
    return t == 0 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(t));
  }

 private:
  Kind kind_ = Kind::diminishing;
  double alpha_ = 0.0;
};

inline double stepsize_at(const StepsizeSchedule& schedule, std::int64_t t) {
  return schedule.at(t);
}

// ---------------------------------------------------------------------------
// Run configuration and state.

enum class Algorithm { odgt, odgt_stochastic, centralized_pgd };

enum class RecordLevel { full, summary };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::odgt: return "odgt";
    case Algorithm::odgt_stochastic: return "odgt_stochastic";
    case Algorithm::centralized_pgd: return "centralized_pgd";
  }
  return "?";
}

struct RunConfig {
  Algorithm algorithm = Algorithm::odgt;
  StepsizeSchedule stepsize = StepsizeSchedule::diminishing();
  std::int64_t horizon = 0;  // 0: run to the problem's horizon
  std::uint64_t seed = 0;
  NoiseModel noise;          // used only by odgt_stochastic
  RecordLevel record = RecordLevel::full;
  // Refuse to run on a schedule that fails validation (warn instead if off).
  bool strict_schedule = true;
};

// Whether gradient oracles answer exactly or through the noise model.
struct OracleMode {
  bool stochastic = false;
  NoiseModel noise;
  std::uint64_t seed = 0;
};

struct SwarmState {
  std::int64_t t = 0;
  Blocks x;           // decisions, x[i] in X_i
  Blocks nu;          // aggregate estimates
  Blocks y;           // grad2-average trackers
  Blocks grad2_eval;  // the (possibly noisy) grad2 draws at (t, x, nu),
                      // reused as the subtracted term next round
};

struct InitialPoint {
  enum class Kind { zeros, random, given };

  static InitialPoint zeros() { return {}; }
  static InitialPoint random(std::uint64_t seed) {
    InitialPoint p;
    p.kind = Kind::random;
    p.seed = seed;
    return p;
  }
  static InitialPoint given(Blocks blocks) {
    InitialPoint p;
    p.kind = Kind::given;
    p.blocks = std::move(blocks);
    return p;
  }

  Kind kind = Kind::zeros;
  std::uint64_t seed = 0;
  Blocks blocks;
};

struct NonFiniteError : std::runtime_error {
  NonFiniteError(std::int64_t round_, int agent_, std::string quantity_)
      : std::runtime_error("non-finite " + quantity_ + " for agent " +
                           std::to_string(agent_) + " at round " +
                           std::to_string(round_)),
        round(round_),
        agent(agent_),
        quantity(std::move(quantity_)) {}

  std::int64_t round;
  int agent;
  std::string quantity;
};

struct ScheduleError : std::runtime_error {
  explicit ScheduleError(ValidationReport report_)
      : std::runtime_error("schedule failed validation: " +
                           (report_.issues.empty()
                                ? std::string("unknown issue")
                                : report_.issues.front().category + " at round " +
                                      std::to_string(report_.issues.front().t) +
                                      ": " + report_.issues.front().detail)),
        report(std::move(report_)) {}

  ValidationReport report;
};

namespace detail {

inline void check_finite(const Blocks& blocks, std::int64_t round,
                         const char* quantity) {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (!blocks[i].allFinite())
      throw NonFiniteError(round, static_cast<int>(i), quantity);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Initialization and single steps.

inline Blocks initial_blocks(const ProblemSpec& spec, const InitialPoint& init) {
  const int n = spec.num_agents();
  Blocks x(static_cast<std::size_t>(n));
  switch (init.kind) {
    case InitialPoint::Kind::zeros:
      for (int i = 0; i < n; ++i)
        x[static_cast<std::size_t>(i)] =
            project(spec.sets[static_cast<std::size_t>(i)],
                    Vector::Zero(spec.agent_dim(i)));
      break;
    case InitialPoint::Kind::random:
      for (int i = 0; i < n; ++i) {
        CounterRng rng({init.seed, 0, i, DrawSlot::init});
        const double span = coordinate_bound(spec.sets[static_cast<std::size_t>(i)]);
        Vector v(spec.agent_dim(i));
        for (Eigen::Index k = 0; k < v.size(); ++k)
          v[k] = rng.uniform(-span, span);
        x[static_cast<std::size_t>(i)] =
            project(spec.sets[static_cast<std::size_t>(i)], v);
      }
      break;
    case InitialPoint::Kind::given:
      if (static_cast<int>(init.blocks.size()) != n)
        throw std::invalid_argument("initial point: wrong block count");
      for (int i = 0; i < n; ++i) {
        if (init.blocks[static_cast<std::size_t>(i)].size() != spec.agent_dim(i))
          throw std::invalid_argument("initial point: wrong block dimension");
        x[static_cast<std::size_t>(i)] =
            project(spec.sets[static_cast<std::size_t>(i)],
                    init.blocks[static_cast<std::size_t>(i)]);
      }
      break;
  }
  return x;
}

// Round-0 state: nu_i seeds the tracker with psi_i(x_i) exactly (aggregation
// values are never noisy); y_i seeds with the round-0 grad2 draw.
inline SwarmState init_state(const ProblemSpec& spec, const InitialPoint& init,
                             const OracleMode& mode) {
  const int n = spec.num_agents();
  SwarmState s;
  s.t = 0;
  s.x = initial_blocks(spec, init);
  s.nu.resize(static_cast<std::size_t>(n));
  s.y.resize(static_cast<std::size_t>(n));
  s.grad2_eval.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    s.nu[ui] = spec.psi[ui].value(s.x[ui]);
    Vector g2 = grad2(spec, i, 0, s.x[ui], s.nu[ui]);
    if (mode.stochastic)
      g2 = noisy_gradient({mode.seed, 0, i, DrawSlot::grad2}, mode.noise, g2);
    s.grad2_eval[ui] = g2;
    s.y[ui] = std::move(g2);
  }
  return s;
}

inline SwarmState odgt_step(const ProblemSpec& spec,
                            const GraphSchedule& schedule,
                            const SwarmState& state, double alpha,
                            const OracleMode& mode) {
  const int n = spec.num_agents();
  const std::int64_t t = state.t;
  const WeightedDigraph graph = schedule.graph_at(t);
  if (graph.size() != n)
    throw std::invalid_argument("odgt_step: schedule size does not match problem");

  Blocks x_next(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    Vector g1 = grad1(spec, i, t, state.x[ui], state.nu[ui]);
    if (mode.stochastic)
      g1 = noisy_gradient({mode.seed, t, i, DrawSlot::grad1}, mode.noise, g1);
    Vector pull;
    if (spec.psi[ui].is_identity() && !mode.stochastic) {
      pull = state.y[ui];
    } else {
      Matrix jac = spec.psi[ui].jacobian(state.x[ui]);
      if (mode.stochastic)
        jac = noisy_jacobian({mode.seed, t, i, DrawSlot::grad_psi}, mode.noise,
                             jac);
      pull = jac.transpose() * state.y[ui];
    }
    x_next[ui] =
        project(spec.sets[ui], state.x[ui] - alpha * (g1 + pull));
  }
  detail::check_finite(x_next, t + 1, "x");

  SwarmState next;
  next.t = t + 1;
  next.nu = mix(graph, state.nu);
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    next.nu[ui] += spec.psi[ui].value(x_next[ui]) - spec.psi[ui].value(state.x[ui]);
  }
  detail::check_finite(next.nu, t + 1, "nu");

  next.y = mix(graph, state.y);
  next.grad2_eval.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    Vector g2 = grad2(spec, i, t + 1, x_next[ui], next.nu[ui]);
    if (mode.stochastic)
      g2 = noisy_gradient({mode.seed, t + 1, i, DrawSlot::grad2}, mode.noise, g2);
    next.y[ui] += g2 - state.grad2_eval[ui];
    next.grad2_eval[ui] = std::move(g2);
  }
  detail::check_finite(next.y, t + 1, "y");

  next.x = std::move(x_next);
  return next;
}

// Exact gradient of the global objective at x: agent i sees
// grad1_i + Dpsi_i^T (average grad2 at the exact aggregate).
inline Blocks centralized_gradient(const ProblemSpec& spec, std::int64_t t,
                                   const Blocks& x) {
  const int n = spec.num_agents();
  const Vector nu = aggregate(spec, x);
  Vector g2_mean = Vector::Zero(spec.agg_dim());
  for (int i = 0; i < n; ++i)
    g2_mean += grad2(spec, i, t, x[static_cast<std::size_t>(i)], nu);
  g2_mean /= n;
  Blocks grad(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    grad[ui] =
        grad1(spec, i, t, x[ui], nu) + spec.psi[ui].pullback(x[ui], g2_mean);
  }
  return grad;
}

// Full-information projected descent on f_t.
inline Blocks centralized_pgd_step(const ProblemSpec& spec, std::int64_t t,
                                   const Blocks& x, double alpha) {
  const Blocks grad = centralized_gradient(spec, t, x);
  Blocks next(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    next[i] = project(spec.sets[i], x[i] - alpha * grad[i]);
  detail::check_finite(next, t + 1, "x");
  return next;
}

// ---------------------------------------------------------------------------
// Whole-run driver.

struct TraceRecord {
  std::int64_t t = 0;
  double alpha = 0.0;        // stepsize applied when leaving this round
  double loss = 0.0;         // f_t(x_t)
  double nu_residual = 0.0;  // || nu_t - 1 (x) mean nu_t ||
  double y_residual = 0.0;   // || y_t - 1 (x) mean y_t ||
  Blocks x, nu, y, grad2;    // populated only at RecordLevel::full
};

struct RunTrace {
  Algorithm algorithm = Algorithm::odgt;
  RecordLevel level = RecordLevel::full;
  std::uint64_t seed = 0;
  std::int64_t horizon = 0;
  std::vector<TraceRecord> records;  // rounds 0..horizon inclusive
  Blocks final_x;
  std::vector<std::string> warnings;
};

namespace detail {

inline double deviation_from_mean(const Blocks& blocks) {
  if (blocks.empty()) return 0.0;
  Vector mean = Vector::Zero(blocks[0].size());
  for (const auto& b : blocks) mean += b;
  mean /= static_cast<double>(blocks.size());
  double sq = 0.0;
  for (const auto& b : blocks) sq += (b - mean).squaredNorm();
  return std::sqrt(sq);
}

inline TraceRecord record_state(const ProblemSpec& spec, const SwarmState& s,
                                double alpha, RecordLevel level) {
  TraceRecord r;
  r.t = s.t;
  r.alpha = alpha;
  r.loss = global_loss(spec, s.t, s.x);
  r.nu_residual = deviation_from_mean(s.nu);
  r.y_residual = deviation_from_mean(s.y);
  if (level == RecordLevel::full) {
    r.x = s.x;
    r.nu = s.nu;
    r.y = s.y;
    r.grad2 = s.grad2_eval;
  }
  return r;
}

}  // namespace detail

inline RunTrace run(const ProblemSpec& spec, const GraphSchedule& schedule,
                    const RunConfig& config,
                    const InitialPoint& init = InitialPoint::zeros()) {
  spec.validate();
  const std::int64_t horizon =
      config.horizon > 0 ? config.horizon : spec.horizon;
  if (horizon > spec.horizon)
    throw std::invalid_argument("run: horizon exceeds the problem's horizon");

  RunTrace trace;
  trace.algorithm = config.algorithm;
  trace.level = config.record;
  trace.seed = config.seed;
  trace.horizon = horizon;
  trace.records.reserve(static_cast<std::size_t>(horizon) + 1);

  if (config.algorithm != Algorithm::centralized_pgd) {
    const ValidationReport report = validate_schedule(schedule, horizon);
    if (!report.passed()) {
      if (config.strict_schedule) throw ScheduleError(report);
      for (const auto& issue : report.issues)
        trace.warnings.push_back("schedule " + issue.category + " at round " +
                                 std::to_string(issue.t) + ": " + issue.detail);
    }
  }

  if (config.algorithm == Algorithm::centralized_pgd) {
    Blocks x = initial_blocks(spec, init);
    for (std::int64_t t = 0; t <= horizon; ++t) {
      TraceRecord r;
      r.t = t;
      r.alpha = config.stepsize.at(t);
      r.loss = global_loss(spec, t, x);
      if (config.record == RecordLevel::full) r.x = x;
      trace.records.push_back(std::move(r));
      if (t < horizon) x = centralized_pgd_step(spec, t, x, config.stepsize.at(t));
    }
    trace.final_x = std::move(x);
    return trace;
  }

  const OracleMode mode{config.algorithm == Algorithm::odgt_stochastic,
                        config.noise, config.seed};
  SwarmState state = init_state(spec, init, mode);
  for (std::int64_t t = 0; t <= horizon; ++t) {
    trace.records.push_back(
        detail::record_state(spec, state, config.stepsize.at(t), config.record));
    if (t < horizon) state = odgt_step(spec, schedule, state, config.stepsize.at(t), mode);
  }
  trace.final_x = state.x;
  return trace;
}

}  // namespace odgt
