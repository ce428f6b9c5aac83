#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "magmap/types.hpp"

namespace magmap::test {

/// Seeded generator shared by the property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Vec3 point(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }

  Points points(Eigen::Index n, const Vec3& lo, const Vec3& hi) {
    Points p(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d) p(i, d) = uniform(lo[d], hi[d]);
    }
    return p;
  }

  Eigen::VectorXd vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Hyperparameters hyper() {
    return {uniform(0.5, 3.0), uniform(0.2, 2.0), uniform(1e-3, 0.1)};
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

}  // namespace magmap::test
