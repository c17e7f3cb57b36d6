#include "odgt/network.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using odgt::Blocks;
using odgt::GraphSchedule;
using odgt::Matrix;
using odgt::Vector;

TEST_CASE("metropolis weights on a two-node path") {
  const auto g = odgt::metropolis_weights(2, {{0, 1}});
  Matrix expect(2, 2);
  expect << 0.5, 0.5, 0.5, 0.5;
  CHECK(g.weights.isApprox(expect));
}

TEST_CASE("metropolis weights on a triangle") {
  const auto g = odgt::metropolis_weights(3, {{0, 1}, {1, 2}, {0, 2}});
  CHECK(g.weights.isApproxToConstant(1.0 / 3.0));
}

TEST_CASE("metropolis weights on a star are doubly stochastic") {
  const auto g = odgt::metropolis_weights(4, {{0, 1}, {0, 2}, {0, 3}});
  CHECK(g.weights(0, 1) == Catch::Approx(0.25));
  CHECK(g.weights(1, 1) == Catch::Approx(0.75));
  for (int i = 0; i < 4; ++i) {
    CHECK(g.weights.row(i).sum() == Catch::Approx(1.0));
    CHECK(g.weights.col(i).sum() == Catch::Approx(1.0));
  }
}

TEST_CASE("metropolis rejects malformed edge lists") {
  CHECK_THROWS_AS(odgt::metropolis_weights(2, {{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(odgt::metropolis_weights(2, {{0, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(odgt::metropolis_weights(3, {{0, 1}, {1, 0}}),
                  std::invalid_argument);
}

TEST_CASE("mix averages neighbor blocks") {
  const auto g = odgt::metropolis_weights(2, {{0, 1}});
  Blocks blocks{Vector(2), Vector(2)};
  blocks[0] << 1.0, 0.0;
  blocks[1] << 3.0, 4.0;
  const Blocks out = odgt::mix(g, blocks);
  Vector expect(2);
  expect << 2.0, 2.0;
  CHECK(out[0].isApprox(expect));
  CHECK(out[1].isApprox(expect));
}

TEST_CASE("mix preserves the block mean and shrinks deviations") {
  odgt::CounterRng rng({7, 0, 0, odgt::DrawSlot::init});
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform(0.0, 6.0));
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    for (int i = 0; i < n; ++i)
      for (int j = i + 2; j < n; ++j)
        if (rng.uniform() < 0.3) edges.emplace_back(i, j);
    const auto g = odgt::metropolis_weights(n, edges);

    Blocks blocks;
    for (int i = 0; i < n; ++i)
      blocks.push_back(support::random_vector(rng, 3, -10.0, 10.0));
    Vector mean = Vector::Zero(3);
    for (const auto& b : blocks) mean += b / n;

    const Blocks out = odgt::mix(g, blocks);
    Vector mean_out = Vector::Zero(3);
    for (const auto& b : out) mean_out += b / n;
    CHECK((mean_out - mean).norm() <= 1e-12);

    double dev_in = 0.0, dev_out = 0.0;
    for (int i = 0; i < n; ++i) {
      dev_in += (blocks[i] - mean).squaredNorm();
      dev_out += (out[i] - mean).squaredNorm();
    }
    CHECK(dev_out <= dev_in + 1e-12);
  }
}

TEST_CASE("cyclic schedules repeat with their period") {
  const auto schedule = odgt::make_q_cyclic_schedule(10, 2, 42);
  CHECK(schedule.period() == 2);
  CHECK(schedule.connectivity_window() == 2);
  CHECK(schedule.graph_at(0).weights == schedule.graph_at(2).weights);
  CHECK(schedule.graph_at(1).weights == schedule.graph_at(3).weights);
  CHECK_THROWS_AS(schedule.graph_at(-1), std::invalid_argument);
}

TEST_CASE("validator accepts well-formed schedules") {
  for (auto [n, q] : {std::pair{2, 1}, {10, 2}, {50, 4}}) {
    const auto schedule = odgt::make_q_cyclic_schedule(n, q, 9001);
    const auto report = odgt::validate_schedule(schedule, 200);
    INFO("n=" << n << " q=" << q);
    CHECK(report.passed());
    CHECK(report.issues.empty());
  }
  const auto single = odgt::make_q_cyclic_schedule(1, 1, 5);
  CHECK(odgt::validate_schedule(single, 10).passed());
}

TEST_CASE("validator accepts generated schedules and they are reproducible") {
  const auto schedule = GraphSchedule::generated(12, 77, 0.25);
  CHECK(schedule.period() == 0);
  CHECK(odgt::validate_schedule(schedule, 100).passed());
  CHECK(schedule.graph_at(5).weights == schedule.graph_at(5).weights);
  CHECK(schedule.graph_at(5).weights != schedule.graph_at(6).weights);
}

TEST_CASE("validator flags a matrix that is only row stochastic") {
  Matrix w(2, 2);
  w << 0.7, 0.3, 0.5, 0.5;
  const auto schedule = GraphSchedule::static_graph(odgt::make_digraph(w), 0.1);
  const auto report = odgt::validate_schedule(schedule, 10);
  CHECK_FALSE(report.passed());
  CHECK_FALSE(report.doubly_stochastic);
  CHECK(report.min_weight_ok);
  CHECK(report.jointly_connected);
}

TEST_CASE("validator flags weights below the declared minimum") {
  Matrix w(2, 2);
  w << 0.7, 0.3, 0.3, 0.7;
  const auto schedule = GraphSchedule::static_graph(odgt::make_digraph(w), 0.4);
  const auto report = odgt::validate_schedule(schedule, 10);
  CHECK_FALSE(report.passed());
  CHECK_FALSE(report.min_weight_ok);
  CHECK(report.doubly_stochastic);
}

TEST_CASE("validator flags self weights below the declared minimum") {
  Matrix swap(2, 2);
  swap << 0.0, 1.0, 1.0, 0.0;
  const auto schedule = GraphSchedule::static_graph(odgt::make_digraph(swap), 0.5);
  const auto report = odgt::validate_schedule(schedule, 10);
  CHECK_FALSE(report.passed());
  CHECK_FALSE(report.min_weight_ok);
  CHECK(report.doubly_stochastic);
  CHECK(report.jointly_connected);
}

TEST_CASE("validator flags a window whose union is disconnected") {
  // Two rounds of pure self-loops: each matrix is doubly stochastic but no
  // information ever crosses between the agents.
  std::vector<odgt::WeightedDigraph> graphs{
      odgt::make_digraph(Matrix::Identity(2, 2)),
      odgt::make_digraph(Matrix::Identity(2, 2))};
  const auto schedule = GraphSchedule::cyclic(std::move(graphs), 0.5, 2);
  const auto report = odgt::validate_schedule(schedule, 10);
  CHECK_FALSE(report.passed());
  CHECK_FALSE(report.jointly_connected);
  CHECK(report.doubly_stochastic);
  CHECK(report.min_weight_ok);
  REQUIRE_FALSE(report.issues.empty());
  CHECK(report.issues.front().category == "connectivity");
}

TEST_CASE("validator flags negative weights") {
  Matrix w(2, 2);
  w << 1.5, -0.5, -0.5, 1.5;
  const auto schedule = GraphSchedule::static_graph(odgt::make_digraph(w), 0.1);
  const auto report = odgt::validate_schedule(schedule, 10);
  CHECK_FALSE(report.doubly_stochastic);
}

TEST_CASE("directed cycles count as strongly connected") {
  Matrix ring = Matrix::Zero(3, 3);
  ring(0, 2) = ring(1, 0) = ring(2, 1) = 1.0;
  CHECK(odgt::strongly_connected(ring));
  Matrix chain = Matrix::Zero(3, 3);
  chain(1, 0) = chain(2, 1) = 1.0;
  CHECK_FALSE(odgt::strongly_connected(chain));
}
