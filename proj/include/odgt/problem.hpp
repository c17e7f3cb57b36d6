#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "odgt/geometry.hpp"
#include "odgt/rng.hpp"

// Problem descriptions: per-agent feasible sets, the maps psi_i whose average
// forms the aggregative variable nu(x) = (1/N) sum_i psi_i(x_i), and
// time-varying losses f_{i,t}(x_i, nu) split into their two gradient blocks.

namespace odgt {

// ---------------------------------------------------------------------------
// Aggregation maps psi_i : R^{n_i} -> R^d.

class AggregationMap {
 public:
  enum class Kind { identity, linear, smooth };

  static AggregationMap identity(int dim) {
    if (dim <= 0) throw std::invalid_argument("AggregationMap: dim must be positive");
    AggregationMap m;
    m.kind_ = Kind::identity;
    m.input_dim_ = m.output_dim_ = dim;
    m.jacobian_bound_ = 1.0;
    m.jacobian_lipschitz_ = 0.0;
    return m;
  }

  static AggregationMap linear(Matrix a) {
    if (a.size() == 0) throw std::invalid_argument("AggregationMap: empty matrix");
    AggregationMap m;
    m.kind_ = Kind::linear;
    m.input_dim_ = static_cast<int>(a.cols());
    m.output_dim_ = static_cast<int>(a.rows());
    m.jacobian_bound_ = a.jacobiSvd().singularValues()(0);
    m.jacobian_lipschitz_ = 0.0;
    m.matrix_ = std::move(a);
    return m;
  }

  // General differentiable map with caller-declared bounds: jacobian_bound
  // dominates ||Dpsi(x)|| and jacobian_lipschitz its variation.
  static AggregationMap smooth(int input_dim, int output_dim,
                               std::function<Vector(const Vector&)> value,
                               std::function<Matrix(const Vector&)> jacobian,
                               double jacobian_bound,
                               double jacobian_lipschitz) {
    if (input_dim <= 0 || output_dim <= 0)
      throw std::invalid_argument("AggregationMap: dims must be positive");
    if (!value || !jacobian)
      throw std::invalid_argument("AggregationMap: missing callbacks");
    AggregationMap m;
    m.kind_ = Kind::smooth;
    m.input_dim_ = input_dim;
    m.output_dim_ = output_dim;
    m.value_fn_ = std::move(value);
    m.jacobian_fn_ = std::move(jacobian);
    m.jacobian_bound_ = jacobian_bound;
    m.jacobian_lipschitz_ = jacobian_lipschitz;
    return m;
  }

  Kind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  double jacobian_bound() const { return jacobian_bound_; }
  double jacobian_lipschitz() const { return jacobian_lipschitz_; }
  bool is_identity() const { return kind_ == Kind::identity; }
  const Matrix& matrix() const {
    if (kind_ != Kind::linear)
      throw std::logic_error("AggregationMap::matrix: not a linear map");
    return matrix_;
  }

  Vector value(const Vector& x) const {
    check_input(x);
    switch (kind_) {
      case Kind::identity: return x;
      case Kind::linear: return matrix_ * x;
      case Kind::smooth: break;
    }
    Vector v = value_fn_(x);
    if (v.size() != output_dim_)
      throw std::invalid_argument("AggregationMap: value callback returned wrong dimension");
    return v;
  }

  Matrix jacobian(const Vector& x) const {
    check_input(x);
    switch (kind_) {
      case Kind::identity: return Matrix::Identity(output_dim_, input_dim_);
      case Kind::linear: return matrix_;
      case Kind::smooth: break;
    }
    Matrix j = jacobian_fn_(x);
    if (j.rows() != output_dim_ || j.cols() != input_dim_)
      throw std::invalid_argument("AggregationMap: jacobian callback returned wrong shape");
    return j;
  }

  // Dpsi(x)^T y without materializing the identity.
  Vector pullback(const Vector& x, const Vector& y) const {
    if (y.size() != output_dim_)
      throw std::invalid_argument("AggregationMap::pullback: wrong y dimension");
    switch (kind_) {
      case Kind::identity: return y;
      case Kind::linear: return matrix_.transpose() * y;
      case Kind::smooth: return jacobian(x).transpose() * y;
    }
    return y;  // unreachable
  }

 private:
  void check_input(const Vector& x) const {
    if (x.size() != input_dim_)
      throw std::invalid_argument("AggregationMap: wrong input dimension");
  }

  Kind kind_ = Kind::identity;
  int input_dim_ = 0;
  int output_dim_ = 0;
  Matrix matrix_;
  std::function<Vector(const Vector&)> value_fn_;
  std::function<Matrix(const Vector&)> jacobian_fn_;
  double jacobian_bound_ = 1.0;
  double jacobian_lipschitz_ = 0.0;
};

// ---------------------------------------------------------------------------
// Loss families.

// Declared regularity constants for a family.  grad_bound dominates the
// norms of the stacked gradients (grad1 of every agent concatenated, and
// likewise grad2) over feasible x and the nu range a run can reach, as well
// as every aggregation-map operator norm; grad2_smoothness is a Lipschitz
// constant for grad2 in (x, nu) jointly (+inf for nonsmooth losses).
// `estimated` marks constants obtained by sampling rather than analysis.
struct LossConstants {
  double grad_bound = 0.0;
  double grad2_smoothness = 0.0;
  bool estimated = false;
};

class LossFamily {
 public:
  virtual ~LossFamily() = default;

  virtual std::string name() const = 0;
  virtual int num_agents() const = 0;
  virtual int agg_dim() const = 0;
  virtual int agent_dim(int agent) const = 0;

  virtual double value(int agent, std::int64_t t, const Vector& x,
                       const Vector& nu) const = 0;
  // Gradient in the agent's own variable, holding nu fixed.
  virtual Vector grad1(int agent, std::int64_t t, const Vector& x,
                       const Vector& nu) const = 0;
  // Gradient in the aggregate slot.
  virtual Vector grad2(int agent, std::int64_t t, const Vector& x,
                       const Vector& nu) const = 0;

  virtual bool time_invariant() const = 0;
  virtual LossConstants constants() const = 0;

  // Exact sup_{x,nu} ||grad2_{t+1} - grad2_t|| for this agent when the family
  // has a closed form; nullopt means callers must estimate by sampling.
  virtual std::optional<double> grad2_shift(int /*agent*/,
                                            std::int64_t /*t*/) const {
    return std::nullopt;
  }

 protected:
  void check_agent(int agent) const {
    if (agent < 0 || agent >= num_agents())
      throw std::invalid_argument("loss family: agent index out of range");
  }
};

// f_{i,t}(x_i, nu) = p_i ||x_i - b_i(t)||^2 + q_i ||nu - u_i(t)||^2, where
// b_i(t) and u_i(t) are per-agent base points translated by a shared offset
// that walks a circle.  The chord the offset advances per round is chosen so
// the stacked minimizer moves exactly drift.rate / sqrt(max(t,1)); rate 0
// freezes the family in time.
struct QuadraticAgent {
  double p = 1.0;
  double q = 0.0;
  Vector b;
  Vector u;
};

struct CircularDrift {
  double rate = 0.0;
  double radius = 5.0;
};

class QuadraticAggregativeLoss : public LossFamily {
 public:
  QuadraticAggregativeLoss(std::vector<QuadraticAgent> agents,
                           CircularDrift drift, std::int64_t horizon,
                           LossConstants constants)
      : agents_(std::move(agents)), drift_(drift), constants_(constants) {
    if (agents_.empty())
      throw std::invalid_argument("QuadraticAggregativeLoss: no agents");
    agg_dim_ = static_cast<int>(agents_[0].u.size());
    for (const auto& a : agents_) {
      if (a.u.size() != agg_dim_)
        throw std::invalid_argument("QuadraticAggregativeLoss: u dims differ");
      if (!(a.p > 0.0) || a.q < 0.0)
        throw std::invalid_argument("QuadraticAggregativeLoss: need p > 0, q >= 0");
    }
    if (drift_.rate < 0.0 || drift_.radius <= 0.0)
      throw std::invalid_argument("QuadraticAggregativeLoss: bad drift");
    if (drift_.rate > 0.0) {
      if (agg_dim_ < 2)
        throw std::invalid_argument(
            "QuadraticAggregativeLoss: circular drift needs agg_dim >= 2");
      const double max_chord =
          drift_.rate / std::sqrt(static_cast<double>(num_agents()));
      if (max_chord > 2.0 * drift_.radius)
        throw std::invalid_argument(
            "QuadraticAggregativeLoss: drift rate exceeds circle diameter");
      // Prefix angles up to one step past the horizon, so grad2_shift and the
      // stepsize picked from variations stay queryable at t = horizon + 1.
      angles_.resize(static_cast<std::size_t>(horizon) + 3, 0.0);
      for (std::size_t t = 1; t < angles_.size(); ++t)
        angles_[t] = angles_[t - 1] +
                     2.0 * std::asin(chord(static_cast<std::int64_t>(t) - 1) /
                                     (2.0 * drift_.radius));
    }
  }

  std::string name() const override { return "quadratic_aggregative"; }
  int num_agents() const override { return static_cast<int>(agents_.size()); }
  int agg_dim() const override { return agg_dim_; }
  int agent_dim(int agent) const override {
    check_agent(agent);
    return static_cast<int>(agents_[agent].b.size());
  }
  const std::vector<QuadraticAgent>& agents() const { return agents_; }
  const CircularDrift& drift() const { return drift_; }

  // Distance the shared offset moves between rounds t and t+1.
  double chord(std::int64_t t) const {
    if (drift_.rate == 0.0) return 0.0;
    return drift_.rate /
           std::sqrt(static_cast<double>(num_agents()) *
                     static_cast<double>(std::max<std::int64_t>(t, 1)));
  }

  // Shared translation applied to every b_i and u_i; zero at t = 0.
  Vector offset(std::int64_t t) const {
    Vector o = Vector::Zero(agg_dim_);
    if (drift_.rate == 0.0 || t == 0) return o;
    if (t < 0 || static_cast<std::size_t>(t) >= angles_.size())
      throw std::out_of_range("QuadraticAggregativeLoss: offset round out of range");
    const double th = angles_[static_cast<std::size_t>(t)];
    o[0] = drift_.radius * (std::cos(th) - 1.0);
    o[1] = drift_.radius * std::sin(th);
    return o;
  }

  Vector b_at(int agent, std::int64_t t) const {
    check_agent(agent);
    const Vector& base = agents_[agent].b;
    if (drift_.rate == 0.0) return base;
    // The offset lives in the aggregate space; base points share its dim.
    return base + offset(t);
  }

  Vector u_at(int agent, std::int64_t t) const {
    check_agent(agent);
    if (drift_.rate == 0.0) return agents_[agent].u;
    return agents_[agent].u + offset(t);
  }

  double value(int agent, std::int64_t t, const Vector& x,
               const Vector& nu) const override {
    const auto& a = agents_[agent];
    return a.p * (x - b_at(agent, t)).squaredNorm() +
           a.q * (nu - u_at(agent, t)).squaredNorm();
  }

  Vector grad1(int agent, std::int64_t t, const Vector& x,
               const Vector& /*nu*/) const override {
    return 2.0 * agents_[agent].p * (x - b_at(agent, t));
  }

  Vector grad2(int agent, std::int64_t t, const Vector& /*x*/,
               const Vector& nu) const override {
    return 2.0 * agents_[agent].q * (nu - u_at(agent, t));
  }

  bool time_invariant() const override { return drift_.rate == 0.0; }
  LossConstants constants() const override { return constants_; }

  std::optional<double> grad2_shift(int agent, std::int64_t t) const override {
    check_agent(agent);
    return 2.0 * agents_[agent].q * chord(t);
  }

 private:
  std::vector<QuadraticAgent> agents_;
  CircularDrift drift_;
  LossConstants constants_;
  int agg_dim_ = 0;
  std::vector<double> angles_;
};

// f_{i,t}(x_i, nu) = rho(x_i - intruder_i(t)) + rho(nu - target(t)) with rho
// either the Euclidean norm (subgradient 0 at the kink) or its Huber
// smoothing at scale eps.  Gradients never exceed unit norm.
enum class Smoothing { none, huber };

inline double rho_value(const Vector& z, Smoothing smoothing, double eps) {
  const double n = z.norm();
  if (smoothing == Smoothing::none || n >= eps) return n;
  return 0.5 * (n * n / eps + eps);
}

inline Vector rho_grad(const Vector& z, Smoothing smoothing, double eps) {
  const double n = z.norm();
  if (smoothing == Smoothing::none) {
    if (n == 0.0) return Vector::Zero(z.size());
    return z / n;
  }
  if (n >= eps) return z / n;
  return z / eps;
}

class TargetSurroundingLoss : public LossFamily {
 public:
  using Path = std::function<Vector(std::int64_t)>;

  TargetSurroundingLoss(int dim, Path target, std::vector<Path> intruders,
                        Smoothing smoothing, double eps = 1e-3)
      : dim_(dim),
        target_(std::move(target)),
        intruders_(std::move(intruders)),
        smoothing_(smoothing),
        eps_(eps) {
    if (dim_ <= 0) throw std::invalid_argument("TargetSurroundingLoss: bad dim");
    if (intruders_.empty() || !target_)
      throw std::invalid_argument("TargetSurroundingLoss: missing paths");
    if (smoothing_ == Smoothing::huber && !(eps_ > 0.0))
      throw std::invalid_argument("TargetSurroundingLoss: eps must be positive");
  }

  std::string name() const override {
    return smoothing_ == Smoothing::huber ? "target_surrounding_huber"
                                          : "target_surrounding";
  }
  int num_agents() const override { return static_cast<int>(intruders_.size()); }
  int agg_dim() const override { return dim_; }
  int agent_dim(int agent) const override {
    check_agent(agent);
    return dim_;
  }
  Smoothing smoothing() const { return smoothing_; }
  double eps() const { return eps_; }
  Vector target_at(std::int64_t t) const { return eval(target_, t); }
  Vector intruder_at(int agent, std::int64_t t) const {
    check_agent(agent);
    return eval(intruders_[agent], t);
  }

  double value(int agent, std::int64_t t, const Vector& x,
               const Vector& nu) const override {
    return rho_value(x - intruder_at(agent, t), smoothing_, eps_) +
           rho_value(nu - target_at(t), smoothing_, eps_);
  }

  Vector grad1(int agent, std::int64_t t, const Vector& x,
               const Vector& /*nu*/) const override {
    return rho_grad(x - intruder_at(agent, t), smoothing_, eps_);
  }

  Vector grad2(int /*agent*/, std::int64_t t, const Vector& /*x*/,
               const Vector& nu) const override {
    return rho_grad(nu - target_at(t), smoothing_, eps_);
  }

  bool time_invariant() const override { return false; }

  LossConstants constants() const override {
    // Each agent's gradients are (sub)unit vectors, so the stacked norm is
    // at most sqrt(N).
    return {std::sqrt(static_cast<double>(intruders_.size())),
            smoothing_ == Smoothing::huber
                ? 1.0 / eps_
                : std::numeric_limits<double>::infinity(),
            false};
  }

  std::optional<double> grad2_shift(int agent, std::int64_t t) const override {
    check_agent(agent);
    const double step = (target_at(t + 1) - target_at(t)).norm();
    if (step == 0.0) return 0.0;
    if (smoothing_ == Smoothing::none) return 2.0;
    return std::min(step / eps_, 2.0);
  }

 private:
  Vector eval(const Path& p, std::int64_t t) const {
    Vector v = p(t);
    if (v.size() != dim_)
      throw std::invalid_argument("TargetSurroundingLoss: path returned wrong dimension");
    return v;
  }

  int dim_;
  Path target_;
  std::vector<Path> intruders_;
  Smoothing smoothing_;
  double eps_;
};

// Arbitrary user-supplied losses with caller-declared constants.
class CustomLoss : public LossFamily {
 public:
  using ValueFn =
      std::function<double(int, std::int64_t, const Vector&, const Vector&)>;
  using GradFn =
      std::function<Vector(int, std::int64_t, const Vector&, const Vector&)>;

  CustomLoss(std::string name, std::vector<int> agent_dims, int agg_dim,
             ValueFn value, GradFn grad1, GradFn grad2,
             LossConstants constants, bool time_invariant)
      : name_(std::move(name)),
        agent_dims_(std::move(agent_dims)),
        agg_dim_(agg_dim),
        value_(std::move(value)),
        grad1_(std::move(grad1)),
        grad2_(std::move(grad2)),
        constants_(constants),
        time_invariant_(time_invariant) {
    if (agent_dims_.empty() || agg_dim_ <= 0)
      throw std::invalid_argument("CustomLoss: bad dimensions");
    if (!value_ || !grad1_ || !grad2_)
      throw std::invalid_argument("CustomLoss: missing callbacks");
  }

  std::string name() const override { return name_; }
  int num_agents() const override { return static_cast<int>(agent_dims_.size()); }
  int agg_dim() const override { return agg_dim_; }
  int agent_dim(int agent) const override {
    check_agent(agent);
    return agent_dims_[agent];
  }

  double value(int agent, std::int64_t t, const Vector& x,
               const Vector& nu) const override {
    return value_(agent, t, x, nu);
  }
  Vector grad1(int agent, std::int64_t t, const Vector& x,
               const Vector& nu) const override {
    return grad1_(agent, t, x, nu);
  }
  Vector grad2(int agent, std::int64_t t, const Vector& x,
               const Vector& nu) const override {
    return grad2_(agent, t, x, nu);
  }

  bool time_invariant() const override { return time_invariant_; }
  LossConstants constants() const override { return constants_; }

 private:
  std::string name_;
  std::vector<int> agent_dims_;
  int agg_dim_;
  ValueFn value_;
  GradFn grad1_, grad2_;
  LossConstants constants_;
  bool time_invariant_;
};

// ---------------------------------------------------------------------------
// Problem assembly.

struct ProblemSpec {
  std::vector<ConvexSet> sets;
  std::vector<AggregationMap> psi;
  std::shared_ptr<const LossFamily> losses;
  std::int64_t horizon = 0;

  int num_agents() const { return static_cast<int>(sets.size()); }
  int agent_dim(int i) const { return sets[static_cast<std::size_t>(i)].dim(); }
  int agg_dim() const { return psi.empty() ? 0 : psi[0].output_dim(); }
  int total_dim() const {
    int d = 0;
    for (const auto& s : sets) d += s.dim();
    return d;
  }

  void validate() const {
    if (sets.empty()) throw std::invalid_argument("ProblemSpec: no agents");
    if (psi.size() != sets.size())
      throw std::invalid_argument("ProblemSpec: one aggregation map per agent required");
    if (!losses) throw std::invalid_argument("ProblemSpec: no loss family");
    if (losses->num_agents() != num_agents())
      throw std::invalid_argument("ProblemSpec: loss family agent count mismatch");
    if (horizon < 1) throw std::invalid_argument("ProblemSpec: horizon must be >= 1");
    const int d = psi[0].output_dim();
    if (losses->agg_dim() != d)
      throw std::invalid_argument("ProblemSpec: aggregate dimension mismatch");
    for (int i = 0; i < num_agents(); ++i) {
      if (psi[static_cast<std::size_t>(i)].input_dim() != sets[static_cast<std::size_t>(i)].dim())
        throw std::invalid_argument("ProblemSpec: psi input dim does not match set");
      if (psi[static_cast<std::size_t>(i)].output_dim() != d)
        throw std::invalid_argument("ProblemSpec: psi output dims differ");
      if (losses->agent_dim(i) != sets[static_cast<std::size_t>(i)].dim())
        throw std::invalid_argument("ProblemSpec: loss agent dim does not match set");
    }
  }
};

// Losses are defined for rounds 0..horizon plus one lookahead round, which
// variation measures need.
inline void check_time(const ProblemSpec& spec, std::int64_t t) {
  if (t < 0 || t > spec.horizon + 1)
    throw std::out_of_range("round " + std::to_string(t) +
                            " outside [0, " + std::to_string(spec.horizon + 1) + "]");
}

inline Blocks split_blocks(const ProblemSpec& spec, const Vector& stacked) {
  if (stacked.size() != spec.total_dim())
    throw std::invalid_argument("split_blocks: wrong stacked dimension");
  Blocks out(static_cast<std::size_t>(spec.num_agents()));
  Eigen::Index at = 0;
  for (int i = 0; i < spec.num_agents(); ++i) {
    out[static_cast<std::size_t>(i)] = stacked.segment(at, spec.agent_dim(i));
    at += spec.agent_dim(i);
  }
  return out;
}

inline Vector stack_blocks(const Blocks& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Vector out(total);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.segment(at, b.size()) = b;
    at += b.size();
  }
  return out;
}

// nu(x) = (1/N) sum_i psi_i(x_i).
inline Vector aggregate(const ProblemSpec& spec, const Blocks& x) {
  if (static_cast<int>(x.size()) != spec.num_agents())
    throw std::invalid_argument("aggregate: wrong block count");
  Vector acc = Vector::Zero(spec.agg_dim());
  for (int i = 0; i < spec.num_agents(); ++i)
    acc += spec.psi[static_cast<std::size_t>(i)].value(x[static_cast<std::size_t>(i)]);
  return acc / spec.num_agents();
}

inline Vector aggregate(const ProblemSpec& spec, const Vector& stacked) {
  return aggregate(spec, split_blocks(spec, stacked));
}

inline double loss_value(const ProblemSpec& spec, int agent, std::int64_t t,
                         const Vector& x, const Vector& nu) {
  check_time(spec, t);
  return spec.losses->value(agent, t, x, nu);
}

inline Vector grad1(const ProblemSpec& spec, int agent, std::int64_t t,
                    const Vector& x, const Vector& nu) {
  check_time(spec, t);
  return spec.losses->grad1(agent, t, x, nu);
}

inline Vector grad2(const ProblemSpec& spec, int agent, std::int64_t t,
                    const Vector& x, const Vector& nu) {
  check_time(spec, t);
  return spec.losses->grad2(agent, t, x, nu);
}

// f_t(x) = sum_i f_{i,t}(x_i, nu(x)).
inline double global_loss(const ProblemSpec& spec, std::int64_t t,
                          const Blocks& x) {
  check_time(spec, t);
  const Vector nu = aggregate(spec, x);
  double total = 0.0;
  for (int i = 0; i < spec.num_agents(); ++i)
    total += spec.losses->value(i, t, x[static_cast<std::size_t>(i)], nu);
  return total;
}

inline double global_loss(const ProblemSpec& spec, std::int64_t t,
                          const Vector& stacked) {
  return global_loss(spec, t, split_blocks(spec, stacked));
}

// ---------------------------------------------------------------------------
// Gradient noise.

struct NoiseModel {
  double sigma1 = 0.0;  // grad1 and jacobian perturbations
  double sigma2 = 0.0;  // grad2 perturbations

  bool enabled() const { return sigma1 > 0.0 || sigma2 > 0.0; }
};

inline double noise_sigma(const NoiseModel& noise, DrawSlot slot) {
  return slot == DrawSlot::grad2 ? noise.sigma2 : noise.sigma1;
}

// Unbiased perturbation with E||e||^2 = sigma^2 regardless of dimension.
inline Vector noisy_gradient(const RngKey& key, const NoiseModel& noise,
                             const Vector& grad) {
  const double sigma = noise_sigma(noise, key.slot);
  if (sigma == 0.0) return grad;
  CounterRng rng(key);
  return grad + (sigma / std::sqrt(static_cast<double>(grad.size()))) *
                    rng.normal_vector(grad.size());
}

// Entrywise perturbation with E||E||_F^2 = sigma1^2.
inline Matrix noisy_jacobian(const RngKey& key, const NoiseModel& noise,
                             const Matrix& jac) {
  const double sigma = noise.sigma1;
  if (sigma == 0.0) return jac;
  CounterRng rng(key);
  const double scale = sigma / std::sqrt(static_cast<double>(jac.size()));
  Matrix out = jac;
  for (Eigen::Index c = 0; c < jac.cols(); ++c)
    for (Eigen::Index r = 0; r < jac.rows(); ++r)
      out(r, c) += scale * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// Builders.

// Gradient-bound constant for a quadratic family over feasible points, with
// the aggregate allowed to wander a half-again-larger ball than feasible
// means ever reach.  The bound covers the stacked gradient vectors, so the
// per-agent suprema combine in quadrature.
inline LossConstants quadratic_constants(const std::vector<QuadraticAgent>& agents,
                                         const std::vector<ConvexSet>& sets,
                                         const CircularDrift& drift) {
  double nu_reach = 0.0;
  for (const auto& s : sets) nu_reach = std::max(nu_reach, norm_bound(s));
  nu_reach *= 1.5;
  const double offset_reach = drift.rate > 0.0 ? 2.0 * drift.radius : 0.0;
  double g1_sq = 0.0, g2_sq = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const double x_reach = norm_bound(sets[i]) + a.b.norm() + offset_reach;
    g1_sq += std::pow(2.0 * a.p * x_reach, 2);
    g2_sq += std::pow(2.0 * a.q * (nu_reach + a.u.norm() + offset_reach), 2);
    l1 = std::max(l1, 2.0 * a.q);
  }
  const double g = std::sqrt(std::max(g1_sq, g2_sq));
  return {std::max(g, 1.0), l1, false};
}

inline ProblemSpec make_quadratic_problem(std::vector<QuadraticAgent> agents,
                                          std::vector<ConvexSet> sets,
                                          CircularDrift drift,
                                          std::int64_t horizon) {
  if (agents.size() != sets.size())
    throw std::invalid_argument("make_quadratic_problem: one set per agent required");
  const LossConstants constants = quadratic_constants(agents, sets, drift);
  ProblemSpec spec;
  spec.sets = std::move(sets);
  for (const auto& s : spec.sets) spec.psi.push_back(AggregationMap::identity(s.dim()));
  spec.losses = std::make_shared<QuadraticAggregativeLoss>(std::move(agents),
                                                           drift, horizon, constants);
  spec.horizon = horizon;
  spec.validate();
  return spec;
}

// Two scalar agents on [-10, 10] with f_1 = x_1^2 + 4 nu^2 and
// f_2 = (x_2 - 2)^2 + 4 nu^2; the cooperative minimizer is (-0.8, 1.2) while
// the best-response equilibrium sits at (-2/3, 4/3).
inline ProblemSpec make_example1(std::int64_t horizon = 1000) {
  std::vector<QuadraticAgent> agents(2);
  agents[0] = {1.0, 4.0, Vector::Zero(1), Vector::Zero(1)};
  agents[1] = {1.0, 4.0, Vector::Constant(1, 2.0), Vector::Zero(1)};
  std::vector<ConvexSet> sets{ConvexSet::box(1, -10.0, 10.0),
                              ConvexSet::box(1, -10.0, 10.0)};
  return make_quadratic_problem(std::move(agents), std::move(sets), {}, horizon);
}

// Surround a moving target: each agent chases its intruder while the swarm
// mean tracks the target.
inline ProblemSpec make_target_surrounding(
    int dim, TargetSurroundingLoss::Path target,
    std::vector<TargetSurroundingLoss::Path> intruders, Smoothing smoothing,
    std::int64_t horizon, double eps = 1e-3, double cap = 50.0) {
  const int n = static_cast<int>(intruders.size());
  ProblemSpec spec;
  for (int i = 0; i < n; ++i) {
    spec.sets.push_back(ConvexSet::capped_space(dim, cap));
    spec.psi.push_back(AggregationMap::identity(dim));
  }
  spec.losses = std::make_shared<TargetSurroundingLoss>(
      dim, std::move(target), std::move(intruders), smoothing, eps);
  spec.horizon = horizon;
  spec.validate();
  return spec;
}

}  // namespace odgt
