#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "odgt/config.hpp"
#include "odgt/engine.hpp"
#include "odgt/problem.hpp"

// The built-in experiments: the two-agent quadratic warm-up, a synthetic
// quadratic family whose minimizers drift at a known rate (so regret is
// computed against exact optima), and the target-surrounding swarm with its
// published target and intruder trajectories.

namespace odgt {

// ---------------------------------------------------------------------------
// Target-surrounding trajectories.

// Target spirals in toward (10, 10); at t = 0 it sits at (11, 11).
inline TargetSurroundingLoss::Path surrounding_target_path() {
  return [](std::int64_t t) {
    const double shrink = 1.0 / (static_cast<double>(t) + 1.0);
    Vector v(2);
    v << 10.0 + shrink, 10.0 + shrink;
    return v;
  };
}

// Every intruder loops around the target on a radius-6 circle; at t = 0 it
// sits at (11, 17).
inline TargetSurroundingLoss::Path surrounding_intruder_path() {
  return [](std::int64_t t) {
    const double tt = static_cast<double>(t);
    const double shrink = 1.0 / (tt + 1.0);
    Vector v(2);
    v << 10.0 + 6.0 * std::sin(tt) + shrink, 10.0 + 6.0 * std::cos(tt) + shrink;
    return v;
  };
}

// ---------------------------------------------------------------------------
// Synthetic quadratics with drifting minimizers.

// Random two-dimensional quadratic agents whose targets all ride one circle
// of radius 5, tuned so the unconstrained minimizer stays strictly inside
// the boxes: the stacked optimum then moves exactly drift_rate/sqrt(t) per
// round and regret can be measured against closed-form optima.
inline ProblemSpec make_drifting_quadratic(int num_agents, std::uint64_t seed,
                                           double drift_rate,
                                           std::int64_t horizon) {
  if (num_agents < 1)
    throw std::invalid_argument("make_drifting_quadratic: need an agent");
  CounterRng rng({seed, 0, 0, DrawSlot::init});
  std::vector<QuadraticAgent> agents(static_cast<std::size_t>(num_agents));
  std::vector<ConvexSet> sets;
  for (auto& agent : agents) {
    agent.p = rng.uniform(0.8, 2.0);
    agent.q = rng.uniform(0.2, 0.8);
    agent.b = Vector(2);
    agent.b << rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5);
    agent.u = Vector(2);
    agent.u << rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5);
    sets.push_back(ConvexSet::box(2, -25.0, 25.0));
  }
  const CircularDrift drift{drift_rate, 5.0};
  return make_quadratic_problem(std::move(agents), std::move(sets), drift,
                                horizon);
}

// ---------------------------------------------------------------------------
// Problem construction from a config section.

inline ProblemSpec build_problem(const ProblemConfig& pc) {
  if (pc.family == "example1") return make_example1(pc.horizon);
  if (pc.family == "quadratic_synthetic")
    return make_drifting_quadratic(pc.agents, pc.seed, pc.drift_rate,
                                   pc.horizon);
  if (pc.family == "target_surrounding") {
    std::vector<TargetSurroundingLoss::Path> intruders(
        static_cast<std::size_t>(pc.agents), surrounding_intruder_path());
    return make_target_surrounding(pc.dim, surrounding_target_path(),
                                   std::move(intruders),
                                   smoothing_from_string(pc.smoothing),
                                   pc.horizon, pc.eps, pc.cap);
  }
  throw ConfigError("unknown problem family \"" + pc.family + "\"");
}

// ---------------------------------------------------------------------------
// Canned experiment configs.

inline ExperimentConfig experiment_example1() {
  ExperimentConfig config;
  config.problem.family = "example1";
  config.problem.agents = 2;
  config.problem.horizon = 1000;
  config.schedule.kind = "q_cyclic";
  config.schedule.window = 1;
  config.schedule.seed = 1;
  return config;
}

inline ExperimentConfig experiment_quadratic_synthetic(int num_agents,
                                                       std::uint64_t seed,
                                                       double drift_rate) {
  if (num_agents < 1)
    throw std::invalid_argument("experiment_quadratic_synthetic: need an agent");
  ExperimentConfig config;
  config.problem.family = "quadratic_synthetic";
  config.problem.agents = num_agents;
  config.problem.seed = seed;
  config.problem.drift_rate = drift_rate;
  config.problem.horizon = 5000;
  config.schedule.kind = "q_cyclic";
  config.schedule.window = 2;
  config.schedule.seed = seed + 1;
  return config;
}

enum class ExperimentScale { desk, paper };

// Swarm-surrounding setup: desk scale keeps the suite fast; paper scale uses
// the published swarm size and window.  The horizon at paper scale is a
// documented choice (the source experiment does not state one).
inline ExperimentConfig experiment_target_surrounding(ExperimentScale scale) {
  ExperimentConfig config;
  config.problem.family = "target_surrounding";
  config.problem.dim = 2;
  config.problem.smoothing = "huber";
  config.problem.eps = 1e-3;
  config.problem.cap = 50.0;
  config.schedule.kind = "q_cyclic";
  config.schedule.seed = 7;
  config.run.sigma1_sq = 0.1;
  config.run.sigma2_sq = 0.1;
  if (scale == ExperimentScale::desk) {
    config.problem.agents = 10;
    config.problem.horizon = 3000;
    config.schedule.window = 2;
  } else {
    config.problem.agents = 50;
    config.problem.horizon = 3000;
    config.schedule.window = 4;
  }
  return config;
}

// ---------------------------------------------------------------------------
// Best-response fixture.

// Gauss–Seidel best responses for the game where each agent minimizes its
// own quadratic loss in its own variable, holding the others fixed.  This
// is the selfish counterpart of the cooperative minimizer: on the two-agent
// warm-up problem it settles at (-2/3, 4/3) rather than (-0.8, 1.2).
inline Blocks best_response_equilibrium(const ProblemSpec& spec,
                                        std::int64_t t = 0, double tol = 1e-12,
                                        int max_rounds = 100000) {
  const auto* fam =
      dynamic_cast<const QuadraticAggregativeLoss*>(spec.losses.get());
  if (fam == nullptr)
    throw std::invalid_argument(
        "best_response_equilibrium: quadratic families only");
  for (const auto& map : spec.psi)
    if (!map.is_identity())
      throw std::invalid_argument(
          "best_response_equilibrium: identity aggregation only");

  const int n = spec.num_agents();
  const double nd = static_cast<double>(n);
  Blocks x = initial_blocks(spec, InitialPoint::zeros());
  for (int round = 0; round < max_rounds; ++round) {
    double move = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      Vector others = Vector::Zero(spec.agg_dim());
      for (int j = 0; j < n; ++j)
        if (j != i) others += x[static_cast<std::size_t>(j)];
      const auto& agent = fam->agents()[ui];
      const double denom = agent.p + agent.q / (nd * nd);
      const Vector target = agent.p * fam->b_at(i, t) +
                            (agent.q / nd) * fam->u_at(i, t) -
                            (agent.q / (nd * nd)) * others;
      const Vector next = project(spec.sets[ui], target / denom);
      move = std::max(move, (next - x[ui]).norm());
      x[ui] = next;
    }
    if (move <= tol) return x;
  }
  throw std::runtime_error(
      "best_response_equilibrium: no fixed point within the iteration cap");
}

}  // namespace odgt
