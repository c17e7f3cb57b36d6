#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

// Closed convex feasible sets with exact Euclidean projections.

namespace odgt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// One vector per agent; the stacked decision variable split at agent
// boundaries.
using Blocks = std::vector<Vector>;

class ConvexSet;

// Axis-aligned box { x : lower <= x <= upper }.
struct Box {
  Vector lower;
  Vector upper;
};

// Euclidean ball { x : ||x - center|| <= radius }.
struct Ball {
  Vector center;
  double radius = 0.0;
};

// Stand-in for an unconstrained R^dim: a symmetric box [-cap, cap]^dim large
// enough that iterates never touch it, kept so compactness assumptions hold.
struct CappedSpace {
  int dim = 0;
  double cap = 50.0;
};

// Cartesian product of component sets; projection factors blockwise.
struct ProductSet {
  std::vector<ConvexSet> components;
};

class ConvexSet {
 public:
  using Variant = std::variant<Box, Ball, CappedSpace, ProductSet>;

  static ConvexSet box(Vector lower, Vector upper) {
    if (lower.size() != upper.size())
      throw std::invalid_argument("box: bound dimensions differ");
    if (lower.size() == 0) throw std::invalid_argument("box: empty bounds");
    for (Eigen::Index k = 0; k < lower.size(); ++k)
      if (!(lower[k] <= upper[k]))
        throw std::invalid_argument("box: lower bound exceeds upper bound");
    return ConvexSet(Box{std::move(lower), std::move(upper)},
                     static_cast<int>(upper.size()));
  }

  static ConvexSet box(int dim, double lower, double upper) {
    return box(Vector::Constant(dim, lower), Vector::Constant(dim, upper));
  }

  static ConvexSet ball(Vector center, double radius) {
    if (center.size() == 0) throw std::invalid_argument("ball: empty center");
    if (!(radius >= 0.0)) throw std::invalid_argument("ball: negative radius");
    const int d = static_cast<int>(center.size());
    return ConvexSet(Ball{std::move(center), radius}, d);
  }

  static ConvexSet capped_space(int dim, double cap = 50.0) {
    if (dim <= 0) throw std::invalid_argument("capped_space: dim must be positive");
    if (!(cap > 0.0)) throw std::invalid_argument("capped_space: cap must be positive");
    return ConvexSet(CappedSpace{dim, cap}, dim);
  }

  static ConvexSet product(std::vector<ConvexSet> components) {
    if (components.empty())
      throw std::invalid_argument("product: no components");
    int d = 0;
    for (const auto& c : components) d += c.dim();
    return ConvexSet(ProductSet{std::move(components)}, d);
  }

  int dim() const { return dim_; }
  const Variant& shape() const { return shape_; }

 private:
  ConvexSet(Variant v, int d) : shape_(std::move(v)), dim_(d) {}

  Variant shape_;
  int dim_ = 0;
};

inline void check_point_dim(const ConvexSet& set, const Vector& x,
                            const char* op) {
  if (x.size() != set.dim())
    throw std::invalid_argument(std::string(op) + ": point has dimension " +
                                std::to_string(x.size()) + ", set has " +
                                std::to_string(set.dim()));
}

inline Vector project(const ConvexSet& set, const Vector& x) {
  check_point_dim(set, x, "project");
  return std::visit(
      [&](const auto& s) -> Vector {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box>) {
          return x.cwiseMax(s.lower).cwiseMin(s.upper);
        } else if constexpr (std::is_same_v<S, Ball>) {
          const Vector d = x - s.center;
          const double n = d.norm();
          if (n <= s.radius) return x;
          if (n == 0.0) return s.center;
          return s.center + (s.radius / n) * d;
        } else if constexpr (std::is_same_v<S, CappedSpace>) {
          return x.cwiseMax(-s.cap).cwiseMin(s.cap);
        } else {
          Vector out(x.size());
          Eigen::Index at = 0;
          for (const auto& c : s.components) {
            out.segment(at, c.dim()) = project(c, x.segment(at, c.dim()));
            at += c.dim();
          }
          return out;
        }
      },
      set.shape());
}

inline bool contains(const ConvexSet& set, const Vector& x,
                     double tol = 1e-9) {
  check_point_dim(set, x, "contains");
  return std::visit(
      [&](const auto& s) -> bool {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box>) {
          return (x.array() >= s.lower.array() - tol).all() &&
                 (x.array() <= s.upper.array() + tol).all();
        } else if constexpr (std::is_same_v<S, Ball>) {
          return (x - s.center).norm() <= s.radius + tol;
        } else if constexpr (std::is_same_v<S, CappedSpace>) {
          return (x.array() >= -s.cap - tol).all() &&
                 (x.array() <= s.cap + tol).all();
        } else {
          Eigen::Index at = 0;
          for (const auto& c : s.components) {
            if (!contains(c, x.segment(at, c.dim()), tol)) return false;
            at += c.dim();
          }
          return true;
        }
      },
      set.shape());
}

// Upper bound on sup{||u - v|| : u, v in set}.  Exact for boxes and balls;
// products combine component diameters in quadrature.
inline double diameter_bound(const ConvexSet& set) {
  return std::visit(
      [](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box>) {
          return (s.upper - s.lower).norm();
        } else if constexpr (std::is_same_v<S, Ball>) {
          return 2.0 * s.radius;
        } else if constexpr (std::is_same_v<S, CappedSpace>) {
          return 2.0 * s.cap * std::sqrt(static_cast<double>(s.dim));
        } else {
          double sq = 0.0;
          for (const auto& c : s.components) {
            const double d = diameter_bound(c);
            sq += d * d;
          }
          return std::sqrt(sq);
        }
      },
      set.shape());
}

// Upper bound on sup{||x|| : x in set}.  Exact for boxes, balls, and products
// of them.
inline double norm_bound(const ConvexSet& set) {
  return std::visit(
      [](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box>) {
          return s.lower.cwiseAbs().cwiseMax(s.upper.cwiseAbs()).norm();
        } else if constexpr (std::is_same_v<S, Ball>) {
          return s.center.norm() + s.radius;
        } else if constexpr (std::is_same_v<S, CappedSpace>) {
          return s.cap * std::sqrt(static_cast<double>(s.dim));
        } else {
          double sq = 0.0;
          for (const auto& c : s.components) {
            const double b = norm_bound(c);
            sq += b * b;
          }
          return std::sqrt(sq);
        }
      },
      set.shape());
}

// Largest-magnitude coordinate over the set; used to size search boxes when
// sampling feasible points.
inline double coordinate_bound(const ConvexSet& set) {
  return std::visit(
      [](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box>) {
          return std::max(s.lower.cwiseAbs().maxCoeff(),
                          s.upper.cwiseAbs().maxCoeff());
        } else if constexpr (std::is_same_v<S, Ball>) {
          return s.center.cwiseAbs().maxCoeff() + s.radius;
        } else if constexpr (std::is_same_v<S, CappedSpace>) {
          return s.cap;
        } else {
          double m = 0.0;
          for (const auto& c : s.components) m = std::max(m, coordinate_bound(c));
          return m;
        }
      },
      set.shape());
}

}  // namespace odgt
