#pragma once

// Shared helpers for the test suites: seeded random geometry, finite-difference
// oracles, and small numeric utilities.  Everything here is deterministic given
// the CounterRng handed in, so failures reproduce exactly.

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "odgt/geometry.hpp"
#include "odgt/network.hpp"
#include "odgt/problem.hpp"
#include "odgt/rng.hpp"

namespace support {

using odgt::Matrix;
using odgt::Vector;

inline Vector random_vector(odgt::CounterRng& rng, int dim, double lo,
                            double hi) {
  Vector v(dim);
  for (int k = 0; k < dim; ++k) v[k] = rng.uniform(lo, hi);
  return v;
}

// Random convex set, possibly a (nested) product.
inline odgt::ConvexSet random_set(odgt::CounterRng& rng, int depth = 0) {
  const double pick = rng.uniform();
  const int dim = 1 + static_cast<int>(rng.uniform(0.0, 4.0));
  if (pick < 0.35) {
    Vector lo = random_vector(rng, dim, -5.0, 5.0);
    Vector width = random_vector(rng, dim, 0.0, 6.0);
    return odgt::ConvexSet::box(lo, lo + width);
  }
  if (pick < 0.7) {
    return odgt::ConvexSet::ball(random_vector(rng, dim, -5.0, 5.0),
                                 rng.uniform(0.1, 5.0));
  }
  if (pick < 0.85 || depth >= 2) {
    return odgt::ConvexSet::capped_space(dim, rng.uniform(1.0, 10.0));
  }
  std::vector<odgt::ConvexSet> parts;
  const int n = 2 + static_cast<int>(rng.uniform(0.0, 2.0));
  for (int k = 0; k < n; ++k) parts.push_back(random_set(rng, depth + 1));
  return odgt::ConvexSet::product(std::move(parts));
}

// A feasible point of `set`, sampled by projecting a random ambient point.
inline Vector random_feasible(odgt::CounterRng& rng, const odgt::ConvexSet& set) {
  const double span = odgt::coordinate_bound(set) + 1.0;
  return odgt::project(set, random_vector(rng, set.dim(), -span, span));
}

// Central finite differences; the oracles the analytic gradients are checked
// against.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f,
                          const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  Vector p = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    p[k] = x[k] + h;
    const double up = f(p);
    p[k] = x[k] - h;
    const double dn = f(p);
    p[k] = x[k];
    g[k] = (up - dn) / (2.0 * h);
  }
  return g;
}

inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f,
                          const Vector& x, double h = 1e-5) {
  Vector p = x;
  Matrix j;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    p[k] = x[k] + h;
    const Vector up = f(p);
    p[k] = x[k] - h;
    const Vector dn = f(p);
    p[k] = x[k];
    if (j.size() == 0) j.resize(up.size(), x.size());
    j.col(k) = (up - dn) / (2.0 * h);
  }
  return j;
}

// Random quadratic problem over dim-2 agents with a mix of feasible-set
// shapes; drift 0 keeps it time invariant.
inline odgt::ProblemSpec random_quadratic_problem(odgt::CounterRng& rng, int n,
                                                  std::int64_t horizon,
                                                  double drift_rate = 0.0) {
  std::vector<odgt::QuadraticAgent> agents;
  std::vector<odgt::ConvexSet> sets;
  for (int i = 0; i < n; ++i) {
    odgt::QuadraticAgent a;
    a.p = rng.uniform(0.5, 2.5);
    a.q = rng.uniform(0.0, 2.0);
    a.b = random_vector(rng, 2, -3.0, 3.0);
    a.u = random_vector(rng, 2, -3.0, 3.0);
    agents.push_back(a);
    const double pick = rng.uniform();
    if (pick < 0.4) {
      sets.push_back(odgt::ConvexSet::box(2, -8.0, 8.0));
    } else if (pick < 0.7) {
      sets.push_back(
          odgt::ConvexSet::ball(random_vector(rng, 2, -1.0, 1.0), 6.0));
    } else {
      sets.push_back(odgt::ConvexSet::capped_space(2, 12.0));
    }
  }
  return odgt::make_quadratic_problem(std::move(agents), std::move(sets),
                                      {drift_rate, 5.0}, horizon);
}

// Same losses but agents of varying dimension feeding the aggregate through
// random linear maps, to exercise non-identity aggregation.
inline odgt::ProblemSpec random_linear_psi_problem(odgt::CounterRng& rng, int n,
                                                   std::int64_t horizon) {
  const int d = 2;
  odgt::ProblemSpec spec;
  std::vector<int> dims;
  std::vector<Vector> bs, us;
  std::vector<double> ps, qs;
  for (int i = 0; i < n; ++i) {
    const int ni = 1 + static_cast<int>(rng.uniform(0.0, 3.0));
    dims.push_back(ni);
    spec.sets.push_back(odgt::ConvexSet::box(ni, -6.0, 6.0));
    Matrix m(d, ni);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < ni; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
    spec.psi.push_back(odgt::AggregationMap::linear(m));
    ps.push_back(rng.uniform(0.5, 2.0));
    qs.push_back(rng.uniform(0.0, 2.0));
    bs.push_back(random_vector(rng, ni, -2.0, 2.0));
    us.push_back(random_vector(rng, d, -2.0, 2.0));
  }
  auto value = [ps, qs, bs, us](int i, std::int64_t, const Vector& x,
                                const Vector& nu) {
    return ps[i] * (x - bs[i]).squaredNorm() + qs[i] * (nu - us[i]).squaredNorm();
  };
  auto g1 = [ps, bs](int i, std::int64_t, const Vector& x, const Vector&) {
    return Vector(2.0 * ps[i] * (x - bs[i]));
  };
  auto g2 = [qs, us](int i, std::int64_t, const Vector&, const Vector& nu) {
    return Vector(2.0 * qs[i] * (nu - us[i]));
  };
  spec.losses = std::make_shared<odgt::CustomLoss>(
      "linear_psi_quadratic", dims, d, value, g1, g2,
      odgt::LossConstants{100.0, 4.0, true}, true);
  spec.horizon = horizon;
  spec.validate();
  return spec;
}

// Random mixing schedule valid for `n` agents.
inline odgt::GraphSchedule random_schedule(odgt::CounterRng& rng, int n) {
  const double pick = rng.uniform();
  if (n > 1 && pick < 0.4) {
    const int q = 1 + static_cast<int>(rng.uniform(0.0, std::min(n, 4) * 1.0));
    return odgt::make_q_cyclic_schedule(n, q, rng.next_u64());
  }
  if (pick < 0.7) {
    return odgt::GraphSchedule::generated(n, rng.next_u64(),
                                          rng.uniform(0.1, 0.5));
  }
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (rng.uniform() < 0.25) edges.emplace_back(i, j);
  auto g = odgt::metropolis_weights(n, edges);
  return odgt::GraphSchedule::static_graph(std::move(g), 1.0 / n, 1);
}

}  // namespace support
