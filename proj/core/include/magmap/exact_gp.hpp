#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "magmap/grid.hpp"
#include "magmap/types.hpp"

namespace magmap {

/// Limits and regularization for dense (cubic-cost) computations.
struct DenseOptions {
  Eigen::Index max_dimension = 6000;  // cap on the 3N side of a dense system
  double relative_jitter = kDefaultRelativeJitter;
};

/// Predictive means and 3x3 covariance blocks at a set of query points.
/// `prior` holds the matching prior blocks of the model that produced them.
struct Prediction {
  Points mean;
  std::vector<Mat3> covariance;
  std::vector<Mat3> prior;
};

/// Full GP regression under the scalar potential model with a dense Cholesky
/// factor of d2(K_ff) + sigma_y^2 I. Immutable once fitted.
class ExactModel {
 public:
  const Hyperparameters& hyperparameters() const { return hyp_; }
  Eigen::Index size() const { return positions_.rows(); }

  /// (d2(K_ff) + sigma_y^2 I)^{-1} rhs.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// L L^T, for checking the factorization.
  Eigen::MatrixXd reconstruct() const;

  Prediction predict(const Points& query) const;

 private:
  friend ExactModel fit_exact(const TrainingSet&, const Hyperparameters&, const DenseOptions&);
  Points positions_;
  Hyperparameters hyp_;
  Eigen::MatrixXd factor_;  // lower Cholesky factor
  Eigen::VectorXd alpha_;
};

ExactModel fit_exact(const TrainingSet& train, const Hyperparameters& hyp, const DenseOptions& options = {});
Prediction predict_exact(const ExactModel& model, const Points& query);

/// 1/2 y^T A^{-1} y + 1/2 log det A + 3N/2 log(2 pi), A = d2(K_ff) + sigma_y^2 I.
double nlml_exact(const TrainingSet& train, const Hyperparameters& hyp, const DenseOptions& options = {});

struct SearchOptions {
  int max_evaluations = 200;
  double initial_step = 0.5;     // simplex edge in log-parameter space
  double size_tolerance = 1e-4;  // stop once the simplex is this small
};

struct TrainingResult {
  Hyperparameters hyperparameters;
  double nlml = 0.0;
  double initial_nlml = 0.0;
  int evaluations = 0;
};

/// Nelder-Mead over (log l, log sigma_f^2, log sigma_y^2). The result is the
/// best point evaluated, so its NLML never exceeds that of `init`.
TrainingResult train_hyperparameters(const TrainingSet& subset, const Hyperparameters& init,
                                     const SearchOptions& search = {}, const DenseOptions& options = {});

struct SorOptions {
  DenseOptions dense;
  Eigen::Index max_inducing = 10000;
};

/// Subset-of-regressors prediction with the grid nodes as inducing inputs and
/// analytic derivative cross-covariances (no interpolation).
Prediction predict_sor(const TrainingSet& train, const InducingGrid& grid, const Hyperparameters& hyp,
                       const Points& query, const SorOptions& options = {});

/// Uniformly random subset of n rows without replacement, kept in original order.
TrainingSet downsample_baseline(const TrainingSet& train, Eigen::Index n, std::uint64_t seed);

}  // namespace magmap
