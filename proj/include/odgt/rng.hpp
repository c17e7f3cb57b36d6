#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

// Counter-based random streams.  Every noise draw in a run is addressed by
// (seed, round, agent, slot), so any single draw can be reproduced without
// replaying the run and traces are bit-identical regardless of how work is
// scheduled across threads.

namespace odgt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Which gradient oracle a draw perturbs.
enum class DrawSlot : std::uint32_t {
  grad1 = 0,
  grad_psi = 1,
  grad2 = 2,
  init = 3,  // initial-point sampling, not a gradient perturbation
};

struct RngKey {
  std::uint64_t seed = 0;
  std::int64_t round = 0;
  int agent = 0;
  DrawSlot slot = DrawSlot::grad1;
};

class CounterRng {
 public:
  explicit CounterRng(const RngKey& key) {
    std::uint64_t h = splitmix64(key.seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(key.round));
    h = splitmix64(h ^ ((static_cast<std::uint64_t>(key.agent) << 32) |
                        static_cast<std::uint64_t>(key.slot)));
    state_ = h;
  }

  std::uint64_t next_u64() { return splitmix64(state_ += 0x9e3779b97f4a7c15ULL); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.  Only the cosine branch is used so each
  // normal consumes exactly two uniforms; draw counts stay predictable.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Eigen::VectorXd normal_vector(Eigen::Index dim) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index k = 0; k < dim; ++k) v[k] = normal();
    return v;
  }

 private:
  std::uint64_t state_;
};

}  // namespace odgt
