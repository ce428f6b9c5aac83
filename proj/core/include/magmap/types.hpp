#pragma once

#include <vector>

#include <Eigen/Core>

#include "magmap/errors.hpp"

namespace magmap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// N x 3 matrix of positions or field vectors. Row-major, so the raw buffer of
/// a measurement matrix Y is exactly vec(Y^T) = (y1x, y1y, y1z, y2x, ...).
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Maps an N x 3 row-major matrix onto its stacked 3N vector without copying.
inline Eigen::Map<const Eigen::VectorXd> stacked(const Points& p) {
  return {p.data(), p.size()};
}
inline Eigen::Map<Eigen::VectorXd> stacked(Points& p) { return {p.data(), p.size()}; }

/// Inverse of stacked(): 3N vector back to N x 3 rows.
inline Points unstack(const Eigen::VectorXd& v) {
  if (v.size() % 3 != 0) throw InvalidArgument("unstack: length is not a multiple of 3");
  return Eigen::Map<const Points>(v.data(), v.size() / 3, 3);
}

/// Diagonal jitter added before factorizing kernel matrices, relative to the
/// signal variance of the matrix in question.
inline constexpr double kDefaultRelativeJitter = 1e-8;

/// Squared-exponential hyperparameters. Variances are squared quantities.
struct Hyperparameters {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 0.01;

  void validate() const;
};

/// Magnetometer training data. Measurements are stored after the per-component
/// mean has been removed; component_means holds what was subtracted.
struct TrainingSet {
  Points positions;
  Points measurements;
  Vec3 component_means = Vec3::Zero();

  Eigen::Index size() const { return positions.rows(); }
  void validate() const;
};

/// Subtracts per-component means from `raw` and returns the centred set.
TrainingSet make_training_set(Points positions, Points raw_measurements);

/// Rows of `set` picked by index, means carried over unchanged.
TrainingSet select_rows(const TrainingSet& set, const std::vector<Eigen::Index>& rows);
Points select_rows(const Points& p, const std::vector<Eigen::Index>& rows);

}  // namespace magmap
