#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "odgt/geometry.hpp"
#include "odgt/rng.hpp"

// Time-varying communication networks.  weights(i, j) > 0 means agent i hears
// from agent j at that round; mixing multiplies stacked per-agent blocks by
// the weight matrix.  Validity (double stochasticity, a minimum positive
// weight, joint connectivity over a window of rounds) is checked by
// validate_schedule rather than enforced at construction, so deliberately
// broken schedules can be built and fed to the validator.

namespace odgt {

struct WeightedDigraph {
  Matrix weights;  // weights(i, j) = a_ij, information flows j -> i

  int size() const { return static_cast<int>(weights.rows()); }
};

inline WeightedDigraph make_digraph(Matrix weights) {
  if (weights.rows() != weights.cols() || weights.rows() == 0)
    throw std::invalid_argument("make_digraph: weight matrix must be square");
  return WeightedDigraph{std::move(weights)};
}

// Metropolis weights for an undirected edge list:
//   a_ij = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal takes the slack.
// Always doubly stochastic with every positive entry >= 1/n; errors if any
// self-weight lands below the requested floor.
inline WeightedDigraph metropolis_weights(
    int n, const std::vector<std::pair<int, int>>& edges,
    double min_self_weight = 0.0) {
  if (n <= 0) throw std::invalid_argument("metropolis_weights: n must be positive");
  std::set<std::pair<int, int>> seen;
  std::vector<int> degree(n, 0);
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw std::invalid_argument("metropolis_weights: endpoint out of range");
    if (i == j) throw std::invalid_argument("metropolis_weights: self loop");
    auto key = std::minmax(i, j);
    if (!seen.insert(key).second)
      throw std::invalid_argument("metropolis_weights: duplicate edge");
    ++degree[i];
    ++degree[j];
  }
  Matrix w = Matrix::Zero(n, n);
  for (auto [i, j] : seen) {
    const double a = 1.0 / (1.0 + std::max(degree[i], degree[j]));
    w(i, j) = a;
    w(j, i) = a;
  }
  for (int i = 0; i < n; ++i) {
    w(i, i) = 1.0 - w.row(i).sum();
    if (w(i, i) < min_self_weight)
      throw std::invalid_argument("metropolis_weights: self weight " +
                                  std::to_string(w(i, i)) + " of node " +
                                  std::to_string(i) + " below required " +
                                  std::to_string(min_self_weight));
  }
  return WeightedDigraph{std::move(w)};
}

inline Blocks mix(const WeightedDigraph& g, const Blocks& blocks) {
  const int n = g.size();
  if (static_cast<int>(blocks.size()) != n)
    throw std::invalid_argument("mix: block count does not match graph size");
  Blocks out(n);
  for (int i = 0; i < n; ++i) {
    Vector acc = Vector::Zero(blocks[0].size());
    for (int j = 0; j < n; ++j) {
      const double a = g.weights(i, j);
      if (a != 0.0) acc += a * blocks[j];
    }
    out[i] = std::move(acc);
  }
  return out;
}

class GraphSchedule {
 public:
  enum class Kind { static_graph, cyclic, generated };

  // One graph used at every round.
  static GraphSchedule static_graph(WeightedDigraph g, double min_weight,
                                    int window = 1) {
    GraphSchedule s;
    s.kind_ = Kind::static_graph;
    s.num_agents_ = g.size();
    s.graphs_.push_back(std::move(g));
    s.min_weight_ = min_weight;
    s.window_ = window;
    s.check_declared();
    return s;
  }

  // graphs[t mod graphs.size()] at round t.
  static GraphSchedule cyclic(std::vector<WeightedDigraph> graphs,
                              double min_weight, int window) {
    if (graphs.empty())
      throw std::invalid_argument("GraphSchedule::cyclic: no graphs");
    GraphSchedule s;
    s.kind_ = Kind::cyclic;
    s.num_agents_ = graphs[0].size();
    for (const auto& g : graphs)
      if (g.size() != s.num_agents_)
        throw std::invalid_argument("GraphSchedule::cyclic: graph sizes differ");
    s.graphs_ = std::move(graphs);
    s.min_weight_ = min_weight;
    s.window_ = window;
    s.check_declared();
    return s;
  }

  // A fresh random connected Metropolis graph every round, derived purely
  // from (seed, t).  Each round's graph is connected on its own, so the
  // declared window is 1 and 1/n lower-bounds every positive weight.
  static GraphSchedule generated(int num_agents, std::uint64_t seed,
                                 double extra_edge_prob = 0.3) {
    if (num_agents <= 0)
      throw std::invalid_argument("GraphSchedule::generated: need agents");
    if (extra_edge_prob < 0.0 || extra_edge_prob > 1.0)
      throw std::invalid_argument("GraphSchedule::generated: bad edge probability");
    GraphSchedule s;
    s.kind_ = Kind::generated;
    s.num_agents_ = num_agents;
    s.seed_ = seed;
    s.extra_edge_prob_ = extra_edge_prob;
    s.min_weight_ = 1.0 / num_agents;
    s.window_ = 1;
    return s;
  }

  Kind kind() const { return kind_; }
  int num_agents() const { return num_agents_; }
  double declared_min_weight() const { return min_weight_; }
  int connectivity_window() const { return window_; }
  // Rounds after which the schedule repeats; 0 for generated (it never does).
  std::int64_t period() const {
    return kind_ == Kind::generated ? 0 : static_cast<std::int64_t>(graphs_.size());
  }
  std::uint64_t seed() const { return seed_; }
  double extra_edge_prob() const { return extra_edge_prob_; }

  WeightedDigraph graph_at(std::int64_t t) const {
    if (t < 0) throw std::invalid_argument("graph_at: negative round");
    if (kind_ == Kind::generated) return generate(t);
    return graphs_[static_cast<std::size_t>(t % period())];
  }

 private:
  void check_declared() const {
    if (!(min_weight_ > 0.0) || min_weight_ > 1.0)
      throw std::invalid_argument("GraphSchedule: declared min weight must be in (0, 1]");
    if (window_ < 1)
      throw std::invalid_argument("GraphSchedule: connectivity window must be >= 1");
  }

  WeightedDigraph generate(std::int64_t t) const {
    const int n = num_agents_;
    CounterRng rng({seed_, t, 0, DrawSlot::init});
    // Random spanning tree: attach each node (in shuffled order) to a random
    // earlier one, then sprinkle extra edges.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<int>(rng.uniform(0.0, i + 1.0))]);
    std::vector<std::pair<int, int>> edges;
    for (int k = 1; k < n; ++k) {
      const int parent = order[static_cast<int>(rng.uniform(0.0, k))];
      edges.emplace_back(parent, order[k]);
    }
    std::set<std::pair<int, int>> have(edges.begin(), edges.end());
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double u = rng.uniform();
        if (u < extra_edge_prob_ && !have.count({i, j}) && !have.count({j, i}))
          edges.emplace_back(i, j);
      }
    return metropolis_weights(n, edges);
  }

  Kind kind_ = Kind::static_graph;
  int num_agents_ = 0;
  std::vector<WeightedDigraph> graphs_;
  double min_weight_ = 1.0;
  int window_ = 1;
  std::uint64_t seed_ = 0;
  double extra_edge_prob_ = 0.3;
};

// Ring plus floor(n/2) random chords, edges dealt round-robin into `window`
// groups that the schedule cycles through.  The union of any `window`
// consecutive rounds contains the full ring, hence is strongly connected.
inline GraphSchedule make_q_cyclic_schedule(int n, int window,
                                            std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("make_q_cyclic_schedule: need agents");
  if (window < 1)
    throw std::invalid_argument("make_q_cyclic_schedule: window must be >= 1");
  if (n == 1) {
    return GraphSchedule::static_graph(make_digraph(Matrix::Ones(1, 1)), 1.0, window);
  }
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    if (int j = (i + 1) % n; i < j) edges.emplace_back(i, j);
  if (n > 2) edges.emplace_back(0, n - 1);

  CounterRng rng({seed, 0, 0, DrawSlot::init});
  std::set<std::pair<int, int>> have(edges.begin(), edges.end());
  const int want_chords = n / 2;
  int added = 0;
  for (int tries = 0; added < want_chords && tries < 50 * (want_chords + 1);
       ++tries) {
    const int i = static_cast<int>(rng.uniform(0.0, n));
    const int j = static_cast<int>(rng.uniform(0.0, n));
    if (i == j) continue;
    const auto key = std::minmax(i, j);
    if (have.count(key)) continue;
    have.insert(key);
    edges.push_back(key);
    ++added;
  }
  if (window > static_cast<int>(edges.size()))
    throw std::invalid_argument(
        "make_q_cyclic_schedule: window exceeds edge count");

  // Deterministic shuffle, then deal edges round-robin across the window.
  for (int i = static_cast<int>(edges.size()) - 1; i > 0; --i)
    std::swap(edges[i], edges[static_cast<int>(rng.uniform(0.0, i + 1.0))]);
  std::vector<std::vector<std::pair<int, int>>> groups(window);
  for (std::size_t k = 0; k < edges.size(); ++k)
    groups[k % window].push_back(edges[k]);

  std::vector<WeightedDigraph> graphs;
  double min_weight = 1.0;
  for (const auto& group : groups) {
    graphs.push_back(metropolis_weights(n, group));
    const Matrix& w = graphs.back().weights;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (w(i, j) > 0.0) min_weight = std::min(min_weight, w(i, j));
  }
  return GraphSchedule::cyclic(std::move(graphs), min_weight, window);
}

namespace detail {

// Tarjan's strongly connected components over an adjacency matrix; returns
// the number of components.
class SccCounter {
 public:
  explicit SccCounter(const std::vector<std::vector<int>>& adj)
      : adj_(adj),
        index_(adj.size(), -1),
        lowlink_(adj.size(), 0),
        on_stack_(adj.size(), false) {}

  int count() {
    for (int v = 0; v < static_cast<int>(adj_.size()); ++v)
      if (index_[v] < 0) strongconnect(v);
    return components_;
  }

 private:
  void strongconnect(int v) {
    index_[v] = lowlink_[v] = next_index_++;
    stack_.push_back(v);
    on_stack_[v] = true;
    for (int w : adj_[v]) {
      if (index_[w] < 0) {
        strongconnect(w);
        lowlink_[v] = std::min(lowlink_[v], lowlink_[w]);
      } else if (on_stack_[w]) {
        lowlink_[v] = std::min(lowlink_[v], index_[w]);
      }
    }
    if (lowlink_[v] == index_[v]) {
      ++components_;
      int w;
      do {
        w = stack_.back();
        stack_.pop_back();
        on_stack_[w] = false;
      } while (w != v);
    }
  }

  const std::vector<std::vector<int>>& adj_;
  std::vector<int> index_, lowlink_;
  std::vector<bool> on_stack_;
  std::vector<int> stack_;
  int next_index_ = 0;
  int components_ = 0;
};

}  // namespace detail

inline bool strongly_connected(const Matrix& union_weights) {
  const int n = static_cast<int>(union_weights.rows());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && union_weights(i, j) > 0.0) adj[j].push_back(i);
  detail::SccCounter scc(adj);
  return scc.count() == 1;
}

struct ValidationIssue {
  std::string category;  // "stochasticity" | "min_weight" | "connectivity"
  std::int64_t t = 0;    // offending round, or window start for connectivity
  std::string detail;
};

struct ValidationReport {
  bool doubly_stochastic = true;
  bool min_weight_ok = true;
  bool jointly_connected = true;
  std::vector<ValidationIssue> issues;

  bool passed() const {
    return doubly_stochastic && min_weight_ok && jointly_connected;
  }
};

// Checks the mixing assumptions at `window` start times t = 0, 1, ...: every
// graph doubly stochastic with nonnegative entries (tolerance 1e-12 on
// row/column sums), every positive weight and every self weight at least the
// declared minimum, and the union of each span of Q consecutive graphs
// strongly connected.  Periodic schedules are probed at most one full period.
inline ValidationReport validate_schedule(const GraphSchedule& schedule,
                                          std::int64_t window) {
  if (window < 1) throw std::invalid_argument("validate_schedule: window < 1");
  constexpr double kSumTol = 1e-12;
  constexpr std::size_t kMaxIssues = 64;
  ValidationReport report;
  const int n = schedule.num_agents();
  const int q = schedule.connectivity_window();
  const std::int64_t period = schedule.period();
  const std::int64_t starts =
      period > 0 ? std::min<std::int64_t>(period, window) : window;
  const std::int64_t rounds =
      period > 0 ? std::min<std::int64_t>(period, starts + q - 1) : starts + q - 1;

  for (std::int64_t t = 0; t < rounds; ++t) {
    const WeightedDigraph g = schedule.graph_at(t);
    if (g.size() != n) {
      report.doubly_stochastic = false;
      report.issues.push_back({"stochasticity", t, "graph size mismatch"});
      continue;
    }
    const Matrix& w = g.weights;
    for (int i = 0; i < n && report.issues.size() < kMaxIssues; ++i) {
      for (int j = 0; j < n; ++j) {
        const double a = w(i, j);
        if (!std::isfinite(a) || a < 0.0) {
          report.doubly_stochastic = false;
          report.issues.push_back(
              {"stochasticity", t,
               "negative or non-finite weight at (" + std::to_string(i) + "," +
                   std::to_string(j) + ")"});
        } else if ((a > 0.0 || i == j) &&
                   a < schedule.declared_min_weight() - kSumTol) {
          report.min_weight_ok = false;
          report.issues.push_back(
              {"min_weight", t,
               std::string(i == j ? "self " : "") + "weight " +
                   std::to_string(a) + " at (" + std::to_string(i) + "," +
                   std::to_string(j) + ") below declared minimum " +
                   std::to_string(schedule.declared_min_weight())});
        }
      }
      const double rs = w.row(i).sum(), cs = w.col(i).sum();
      if (std::abs(rs - 1.0) > kSumTol) {
        report.doubly_stochastic = false;
        report.issues.push_back({"stochasticity", t,
                                 "row " + std::to_string(i) + " sums to " +
                                     std::to_string(rs)});
      }
      if (std::abs(cs - 1.0) > kSumTol) {
        report.doubly_stochastic = false;
        report.issues.push_back({"stochasticity", t,
                                 "column " + std::to_string(i) + " sums to " +
                                     std::to_string(cs)});
      }
    }
  }

  for (std::int64_t t0 = 0; t0 < starts; ++t0) {
    Matrix acc = Matrix::Zero(n, n);
    for (int k = 0; k < q; ++k) acc += schedule.graph_at(t0 + k).weights;
    if (!strongly_connected(acc)) {
      report.jointly_connected = false;
      report.issues.push_back(
          {"connectivity", t0,
           "union of rounds [" + std::to_string(t0) + ", " +
               std::to_string(t0 + q) + ") is not strongly connected"});
      if (report.issues.size() >= kMaxIssues) break;
    }
  }
  return report;
}

}  // namespace odgt
