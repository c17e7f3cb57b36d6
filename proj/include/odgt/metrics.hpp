#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "odgt/engine.hpp"
#include "odgt/problem.hpp"

// Regret accounting.  A run plays rounds t = 0..T-1: the swarm holds x_t,
// pays f_t(x_t), and moves on.  Dynamic regret compares against the
// per-round minimizers x_t* = argmin_{x in X} f_t(x),
//
//   R_T = sum_{t<T} [ f_t(x_t) - f_t(x_t*) ],
//
// and the regularity of the round sequence is summarized by how far the
// optima travel (path variation) and how much grad2 changes between
// consecutive rounds (gradient variation).

namespace odgt {

// ---------------------------------------------------------------------------
// Instantaneous optima.

struct SolverConfig {
  double step_tol = 1e-8;       // stop once the iterate moves less than this
  std::int64_t max_iters = 100000;
  double residual_tol = 1e-6;   // projected-gradient residual for success
  int threads = 1;              // parallel sweep chunks when > 1
};

struct InstantOptimum {
  Vector x;                // stacked minimizer
  double value = 0.0;      // f_t at the minimizer
  double residual = 0.0;   // || x - P[x - grad f_t(x)] ||
  std::int64_t iterations = 0;
  bool converged = true;
};

struct SolverStats {
  std::int64_t solves = 0;
  std::int64_t total_iterations = 0;
  double max_residual = 0.0;
  bool all_converged = true;

  void absorb(const InstantOptimum& opt) {
    ++solves;
    total_iterations += opt.iterations;
    max_residual = std::max(max_residual, opt.residual);
    all_converged = all_converged && opt.converged;
  }
};

namespace detail {

inline double blocks_distance(const Blocks& a, const Blocks& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sq);
}

inline Blocks project_step(const ProblemSpec& spec, const Blocks& x,
                           const Blocks& grad, double eta) {
  Blocks next(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    next[i] = project(spec.sets[i], x[i] - eta * grad[i]);
  return next;
}

inline double projected_residual(const ProblemSpec& spec, std::int64_t t,
                                 const Blocks& x) {
  const Blocks grad = centralized_gradient(spec, t, x);
  return blocks_distance(x, project_step(spec, x, grad, 1.0));
}

// Unconstrained minimizer of a quadratic family under the identity
// aggregation.  Setting the per-agent gradients to zero couples the agents
// only through s = sum_j q_j (nu - u_j), which closes to a scalar-shaped
// fixed point:
//
//   nu* = (mean b + c w) / (1 + c S),  c = (1/N^2) sum 1/p_j,
//   S = sum q_j,  w = sum q_j u_j,  x_i* = b_i - (S nu* - w) / (N p_i).
//
// Valid only when every x_i* is feasible; callers fall back to descent
// otherwise.
inline std::optional<Blocks> quadratic_unconstrained_optimum(
    const ProblemSpec& spec, std::int64_t t) {
  const auto* fam =
      dynamic_cast<const QuadraticAggregativeLoss*>(spec.losses.get());
  if (fam == nullptr) return std::nullopt;
  for (const auto& map : spec.psi)
    if (!map.is_identity()) return std::nullopt;

  const int n = spec.num_agents();
  const int d = spec.agg_dim();
  double coupling = 0.0, q_sum = 0.0;
  Vector b_mean = Vector::Zero(d), w = Vector::Zero(d);
  for (int i = 0; i < n; ++i) {
    const auto& agent = fam->agents()[static_cast<std::size_t>(i)];
    coupling += 1.0 / agent.p;
    q_sum += agent.q;
    b_mean += fam->b_at(i, t);
    w += agent.q * fam->u_at(i, t);
  }
  coupling /= static_cast<double>(n) * static_cast<double>(n);
  b_mean /= static_cast<double>(n);

  const Vector nu_star = (b_mean + coupling * w) / (1.0 + coupling * q_sum);
  const Vector s = q_sum * nu_star - w;
  Blocks x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto& agent = fam->agents()[ui];
    x[ui] = fam->b_at(i, t) - s / (static_cast<double>(n) * agent.p);
    if (!contains(spec.sets[ui], x[ui])) return std::nullopt;
  }
  return x;
}

}  // namespace detail

// Minimizes the round-t global objective over the product of the agents'
// sets.  Quadratic families under the identity aggregation are solved in
// closed form when the unconstrained minimizer is feasible; everything else
// runs projected gradient descent with backtracking, warm-started from
// `warm_start` when given.
inline InstantOptimum solve_instantaneous_optimum(
    const ProblemSpec& spec, std::int64_t t, const SolverConfig& config = {},
    const Blocks* warm_start = nullptr) {
  if (config.step_tol <= 0.0 || config.max_iters < 1)
    throw std::invalid_argument("solve_instantaneous_optimum: bad solver config");

  InstantOptimum out;
  if (auto closed = detail::quadratic_unconstrained_optimum(spec, t)) {
    out.x = stack_blocks(*closed);
    out.value = global_loss(spec, t, *closed);
    out.residual = detail::projected_residual(spec, t, *closed);
    return out;
  }

  Blocks x;
  if (warm_start != nullptr) {
    x.resize(warm_start->size());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = project(spec.sets[i], (*warm_start)[i]);
  } else {
    x = initial_blocks(spec, InitialPoint::zeros());
  }

  double fx = global_loss(spec, t, x);
  double eta = 1.0;
  bool converged = false;
  std::int64_t iters = 0;
  while (iters < config.max_iters) {
    const Blocks grad = centralized_gradient(spec, t, x);
    Blocks next;
    double f_next = 0.0, move = 0.0;
    while (true) {
      next = detail::project_step(spec, x, grad, eta);
      f_next = global_loss(spec, t, next);
      move = detail::blocks_distance(next, x);
      // Sufficient decrease against the local quadratic model; halving eta
      // must eventually satisfy it for any smooth convex objective.
      double model = fx;
      for (std::size_t i = 0; i < x.size(); ++i)
        model += grad[i].dot(next[i] - x[i]);
      model += move * move / (2.0 * eta);
      if (f_next <= model + 1e-15 * std::abs(model) || eta < 1e-16) break;
      eta *= 0.5;
    }
    ++iters;
    x = std::move(next);
    fx = f_next;
    if (move <= config.step_tol) {
      converged = true;
      break;
    }
    eta = std::min(eta * 1.5, 1e6);
  }

  out.x = stack_blocks(x);
  out.value = fx;
  out.iterations = iters;
  out.converged = converged;
  out.residual = detail::projected_residual(spec, t, x);
  return out;
}

// Optima for every round in [first_t, last_t], inclusive.  Time-invariant
// families are solved once; time-varying sweeps warm-start each round from
// the previous optimum and can split the range across threads.
inline std::pair<std::vector<InstantOptimum>, SolverStats> solve_optima(
    const ProblemSpec& spec, std::int64_t first_t, std::int64_t last_t,
    const SolverConfig& config = {}) {
  if (last_t < first_t)
    throw std::invalid_argument("solve_optima: empty round range");
  const auto count = static_cast<std::size_t>(last_t - first_t + 1);
  std::vector<InstantOptimum> optima(count);
  SolverStats stats;

  if (spec.losses->time_invariant()) {
    const InstantOptimum once = solve_instantaneous_optimum(spec, first_t, config);
    stats.absorb(once);
    std::fill(optima.begin(), optima.end(), once);
    return {std::move(optima), stats};
  }

  const auto sweep = [&](std::size_t begin, std::size_t end) {
    Blocks warm;
    for (std::size_t k = begin; k < end; ++k) {
      const Blocks* start = warm.empty() ? nullptr : &warm;
      optima[k] = solve_instantaneous_optimum(
          spec, first_t + static_cast<std::int64_t>(k), config, start);
      warm = split_blocks(spec, optima[k].x);
    }
  };

  const int threads = std::max(1, config.threads);
  if (threads == 1 || count < 16) {
    sweep(0, count);
  } else {
    const std::size_t chunk = (count + threads - 1) / threads;
    std::vector<std::future<void>> jobs;
    for (std::size_t begin = 0; begin < count; begin += chunk)
      jobs.push_back(std::async(std::launch::async, sweep, begin,
                                std::min(begin + chunk, count)));
    for (auto& job : jobs) job.get();
  }
  for (const auto& opt : optima) stats.absorb(opt);
  return {std::move(optima), stats};
}

// ---------------------------------------------------------------------------
// Dynamic regret.

struct RegretSeries {
  double total = 0.0;
  std::vector<double> instant;     // f_t(x_t) - f_t(x_t*), one per round
  std::vector<double> cumulative;  // running sums R_1..R_T
  std::vector<double> over_t;      // R_t / t, the usual convergence plot
};

// optima[k] must be the round-k minimizer for k = 0..T-1 (extra entries are
// ignored); states come from the trace, so summary-mode runs work off their
// recorded losses.
inline RegretSeries dynamic_regret(const ProblemSpec& spec,
                                   const RunTrace& trace,
                                   const std::vector<InstantOptimum>& optima) {
  const std::int64_t rounds = trace.horizon;
  if (static_cast<std::int64_t>(trace.records.size()) < rounds)
    throw std::invalid_argument("dynamic_regret: trace shorter than its horizon");
  if (static_cast<std::int64_t>(optima.size()) < rounds)
    throw std::invalid_argument("dynamic_regret: need an optimum per played round");

  RegretSeries series;
  series.instant.reserve(static_cast<std::size_t>(rounds));
  series.cumulative.reserve(static_cast<std::size_t>(rounds));
  series.over_t.reserve(static_cast<std::size_t>(rounds));
  for (std::int64_t t = 0; t < rounds; ++t) {
    const auto& rec = trace.records[static_cast<std::size_t>(t)];
    const double played =
        rec.x.empty() ? rec.loss : global_loss(spec, rec.t, rec.x);
    const double gap = played - optima[static_cast<std::size_t>(t)].value;
    series.total += gap;
    series.instant.push_back(gap);
    series.cumulative.push_back(series.total);
    series.over_t.push_back(series.total / static_cast<double>(t + 1));
  }
  return series;
}

// ---------------------------------------------------------------------------
// Path variation of the optima.

// sum_k w_k ||x*_{k+1} - x*_k|| with caller-chosen weights; the unit
// overload takes w = 1, the others take w_k = 1/alpha_k.
inline double path_variation(const std::vector<InstantOptimum>& optima) {
  if (optima.size() < 2)
    throw std::invalid_argument("path_variation: need at least two optima");
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < optima.size(); ++k)
    total += (optima[k + 1].x - optima[k].x).norm();
  return total;
}

inline double path_variation(const std::vector<InstantOptimum>& optima,
                             const std::vector<double>& alphas) {
  if (optima.size() < 2)
    throw std::invalid_argument("path_variation: need at least two optima");
  if (alphas.size() + 1 < optima.size())
    throw std::invalid_argument("path_variation: need a stepsize per step");
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < optima.size(); ++k) {
    if (!(alphas[k] > 0.0))
      throw std::invalid_argument("path_variation: stepsizes must be positive");
    total += (optima[k + 1].x - optima[k].x).norm() / alphas[k];
  }
  return total;
}

inline double path_variation(const std::vector<InstantOptimum>& optima,
                             const StepsizeSchedule& schedule,
                             std::int64_t first_t = 0) {
  if (optima.size() < 2)
    throw std::invalid_argument("path_variation: need at least two optima");
  std::vector<double> alphas(optima.size() - 1);
  for (std::size_t k = 0; k < alphas.size(); ++k)
    alphas[k] = schedule.at(first_t + static_cast<std::int64_t>(k));
  return path_variation(optima, alphas);
}

// ---------------------------------------------------------------------------
// Gradient variation.

enum class GradWeighting {
  unit_sum,             // sum_t sum_i sup ||grad2_{i,t+1} - grad2_{i,t}||
  alpha_weighted_square // sum_t alpha_t (sum_i sup ...)^2
};

struct GradVariationConfig {
  std::int64_t first_t = 0;
  std::int64_t horizon = 0;       // rounds summed; 0 means the spec's horizon
  std::vector<double> alphas;     // weights for alpha_weighted_square; empty = 1
  int samples = 0;                // Monte Carlo budget per (agent, round)
  double z_box_halfwidth = 50.0;  // aggregate box searched when sampling
  std::uint64_t seed = 1;
};

struct GradVariation {
  double value = 0.0;
  bool estimated = false;   // some terms came from sampling, not analysis
  bool restricted = false;  // sup taken over a compact aggregate box
};

namespace detail {

// Largest sampled ||grad2_{i,t+1} - grad2_{i,t}|| over the agent's set and
// the aggregate box.  Draws come off one deterministic stream per (agent,
// round), so a larger budget extends — never reshuffles — a smaller one.
inline double sampled_grad2_shift(const ProblemSpec& spec, int agent,
                                  std::int64_t t,
                                  const GradVariationConfig& config) {
  CounterRng rng({config.seed, t, agent, DrawSlot::init});
  const auto ui = static_cast<std::size_t>(agent);
  const int xd = spec.agent_dim(agent);
  const int zd = spec.agg_dim();
  const double reach = norm_bound(spec.sets[ui]);
  double best = 0.0;
  for (int k = 0; k < config.samples; ++k) {
    Vector x(xd);
    for (int c = 0; c < xd; ++c) x[c] = rng.uniform(-reach, reach);
    x = project(spec.sets[ui], x);
    Vector z(zd);
    for (int c = 0; c < zd; ++c)
      z[c] = rng.uniform(-config.z_box_halfwidth, config.z_box_halfwidth);
    const Vector diff = spec.losses->grad2(agent, t + 1, x, z) -
                        spec.losses->grad2(agent, t, x, z);
    best = std::max(best, diff.norm());
  }
  return best;
}

}  // namespace detail

// Round-to-round drift of grad2, summed over rounds [first_t, first_t +
// horizon).  Families that report an analytic per-round shift are summed
// exactly; otherwise each term is the max over `samples` draws, which lower
// bounds the true sup and is flagged as such.
inline GradVariation gradient_variation(const ProblemSpec& spec,
                                        GradWeighting weighting,
                                        const GradVariationConfig& config = {}) {
  const std::int64_t rounds =
      config.horizon > 0 ? config.horizon : spec.horizon;
  if (rounds < 1)
    throw std::invalid_argument("gradient_variation: need at least one round");
  if (weighting == GradWeighting::alpha_weighted_square &&
      !config.alphas.empty() &&
      config.alphas.size() < static_cast<std::size_t>(rounds))
    throw std::invalid_argument("gradient_variation: need a weight per round");

  GradVariation result;
  if (spec.losses->time_invariant()) return result;

  const int n = spec.num_agents();
  for (std::int64_t k = 0; k < rounds; ++k) {
    const std::int64_t t = config.first_t + k;
    double round_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if (const auto shift = spec.losses->grad2_shift(i, t)) {
        round_sum += *shift;
        continue;
      }
      if (config.samples < 1)
        throw std::invalid_argument(
            "gradient_variation: family has no analytic grad2 shift; "
            "set a sampling budget");
      round_sum += detail::sampled_grad2_shift(spec, i, t, config);
      result.estimated = true;
      result.restricted = true;
    }
    if (weighting == GradWeighting::unit_sum) {
      result.value += round_sum;
    } else {
      const double w = config.alphas.empty()
                           ? 1.0
                           : config.alphas[static_cast<std::size_t>(k)];
      if (!(w > 0.0))
        throw std::invalid_argument("gradient_variation: weights must be positive");
      result.value += w * round_sum * round_sum;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Consensus tracking residuals.

struct ResidualSeries {
  std::vector<double> nu;  // || nu_t - 1 (x) mean nu_t ||
  std::vector<double> y;   // || y_t - 1 (x) mean y_t ||
};

inline ResidualSeries tracking_residuals(const RunTrace& trace) {
  ResidualSeries series;
  series.nu.reserve(trace.records.size());
  series.y.reserve(trace.records.size());
  for (const auto& rec : trace.records) {
    series.nu.push_back(rec.nu.empty() ? rec.nu_residual
                                       : detail::deviation_from_mean(rec.nu));
    series.y.push_back(rec.y.empty() ? rec.y_residual
                                     : detail::deviation_from_mean(rec.y));
  }
  return series;
}

// ---------------------------------------------------------------------------
// A-priori bound on the y-residual.

// Constants controlling how far the trackers can stray from their mean on a
// network whose positive weights stay above `min_weight` and whose unions
// over `window` consecutive rounds are strongly connected: the stacked
// deviation || y_t - 1 (x) mean y_t || never exceeds N * b1.
struct BoundConstants {
  double gamma = 1.0;
  double xi = 1.0;
  double b1 = 0.0;
};

inline BoundConstants compute_bound_constants(int num_agents, double min_weight,
                                              int window, double grad_bound,
                                              double max_initial_y_norm) {
  if (num_agents < 1)
    throw std::invalid_argument("compute_bound_constants: need an agent");
  if (!(min_weight > 0.0 && min_weight < 1.0))
    throw std::invalid_argument("compute_bound_constants: min weight outside (0,1)");
  if (window < 1)
    throw std::invalid_argument("compute_bound_constants: window < 1");
  if (grad_bound < 0.0 || max_initial_y_norm < 0.0)
    throw std::invalid_argument("compute_bound_constants: negative bound");

  const double n = static_cast<double>(num_agents);
  const double base = 1.0 - min_weight / (2.0 * n * n);
  BoundConstants out;
  out.gamma = 1.0 / (base * base);
  out.xi = std::pow(base, 1.0 / static_cast<double>(window));
  out.b1 = n * out.gamma * max_initial_y_norm +
           2.0 * n * grad_bound * out.gamma * out.xi / (1.0 - out.xi) +
           4.0 * grad_bound;
  return out;
}

inline BoundConstants compute_bound_constants(int num_agents, double min_weight,
                                              int window, double grad_bound,
                                              const Blocks& first_round_y) {
  double max_norm = 0.0;
  for (const auto& block : first_round_y)
    max_norm = std::max(max_norm, block.norm());
  return compute_bound_constants(num_agents, min_weight, window, grad_bound,
                                 max_norm);
}

// ---------------------------------------------------------------------------
// One-call report.

struct RegretReport {
  double regret_total = 0.0;
  std::vector<double> regret_over_t;
  double path_variation_weighted = 0.0;
  double path_variation_unit = 0.0;
  double grad_variation = 0.0;           // unit-sum form
  double grad_variation_weighted = 0.0;  // alpha-weighted squared form
  bool grad_variation_estimated = false;
  bool grad_variation_restricted = false;
  std::vector<InstantOptimum> optima;
  SolverStats optima_solver_stats;
};

inline RegretReport regret_report(const ProblemSpec& spec,
                                  const RunTrace& trace,
                                  const SolverConfig& solver = {},
                                  int variation_samples = 256) {
  const std::int64_t rounds = trace.horizon;
  if (rounds < 1)
    throw std::invalid_argument("regret_report: trace played no rounds");

  RegretReport report;
  auto [optima, stats] = solve_optima(spec, 0, rounds, solver);
  report.optima = std::move(optima);
  report.optima_solver_stats = stats;

  const RegretSeries regret = dynamic_regret(spec, trace, report.optima);
  report.regret_total = regret.total;
  report.regret_over_t = regret.over_t;

  std::vector<double> alphas(static_cast<std::size_t>(rounds));
  for (std::int64_t t = 0; t < rounds; ++t)
    alphas[static_cast<std::size_t>(t)] =
        trace.records[static_cast<std::size_t>(t)].alpha;
  report.path_variation_unit = path_variation(report.optima);
  report.path_variation_weighted = path_variation(report.optima, alphas);

  GradVariationConfig gv;
  gv.horizon = rounds;
  gv.samples = variation_samples;
  const GradVariation unit = gradient_variation(spec, GradWeighting::unit_sum, gv);
  gv.alphas = std::move(alphas);
  const GradVariation weighted =
      gradient_variation(spec, GradWeighting::alpha_weighted_square, gv);
  report.grad_variation = unit.value;
  report.grad_variation_weighted = weighted.value;
  report.grad_variation_estimated = unit.estimated || weighted.estimated;
  report.grad_variation_restricted = unit.restricted || weighted.restricted;
  return report;
}

// ---------------------------------------------------------------------------
// Expectation over seeds.

struct ExpectedRegret {
  std::vector<std::uint64_t> seeds;
  std::vector<double> totals;       // per-seed R_T
  double mean_total = 0.0;
  double se_total = 0.0;            // standard error of the mean
  std::vector<double> mean_over_t;  // mean R_t / t across seeds
  std::vector<double> se_over_t;
};

inline std::vector<std::uint64_t> make_seed_list(int count,
                                                 std::uint64_t base = 1) {
  if (count < 1) throw std::invalid_argument("make_seed_list: count < 1");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    seeds[static_cast<std::size_t>(k)] = base + static_cast<std::uint64_t>(k);
  return seeds;
}

// Reruns the configured algorithm once per seed and averages the regret
// series; the optima are shared across seeds since they do not depend on
// the noise draws.
inline ExpectedRegret expected_regret(const ProblemSpec& spec,
                                      const GraphSchedule& schedule,
                                      RunConfig config,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<InstantOptimum>& optima) {
  if (seeds.empty())
    throw std::invalid_argument("expected_regret: need at least one seed");

  const auto runs = seeds.size();
  std::vector<std::future<RegretSeries>> jobs;
  jobs.reserve(runs);
  for (const std::uint64_t seed : seeds) {
    RunConfig seeded = config;
    seeded.seed = seed;
    seeded.record = RecordLevel::summary;
    jobs.push_back(
        std::async(std::launch::async, [&spec, &schedule, &optima, seeded] {
          const RunTrace trace = run(spec, schedule, seeded);
          return dynamic_regret(spec, trace, optima);
        }));
  }

  ExpectedRegret out;
  out.seeds = seeds;
  std::vector<RegretSeries> all;
  all.reserve(runs);
  for (auto& job : jobs) all.push_back(job.get());

  const auto rounds = all.front().over_t.size();
  out.totals.reserve(runs);
  for (const auto& series : all) out.totals.push_back(series.total);
  out.mean_over_t.assign(rounds, 0.0);
  out.se_over_t.assign(rounds, 0.0);
  for (std::size_t t = 0; t < rounds; ++t) {
    double mean = 0.0;
    for (const auto& series : all) mean += series.over_t[t];
    mean /= static_cast<double>(runs);
    double var = 0.0;
    for (const auto& series : all)
      var += (series.over_t[t] - mean) * (series.over_t[t] - mean);
    out.mean_over_t[t] = mean;
    if (runs > 1)
      out.se_over_t[t] = std::sqrt(var / static_cast<double>(runs - 1) /
                                   static_cast<double>(runs));
  }
  double mean = 0.0;
  for (const double total : out.totals) mean += total;
  mean /= static_cast<double>(runs);
  double var = 0.0;
  for (const double total : out.totals) var += (total - mean) * (total - mean);
  out.mean_total = mean;
  if (runs > 1)
    out.se_total = std::sqrt(var / static_cast<double>(runs - 1) /
                             static_cast<double>(runs));
  return out;
}

}  // namespace odgt
