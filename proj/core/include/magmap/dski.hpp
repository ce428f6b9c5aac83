#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Core>

#include "magmap/grid.hpp"
#include "magmap/krylov.hpp"
#include "magmap/map_table.hpp"
#include "magmap/types.hpp"

namespace magmap {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class LanczosStart {
  Data,    // normalized vec(Y^T); falls back to Random when Y = 0
  Random,  // seeded standard normal
};

struct FitOptions {
  CgOptions cg;
  bool precondition = true;  // Jacobi on the exact diagonal of A
  int lanczos_steps = 100;   // 0 skips the variance precomputation
  LanczosStart lanczos_start = LanczosStart::Data;
  std::uint64_t seed = 0;
  double relative_jitter = kDefaultRelativeJitter;
};

struct FitDiagnostics {
  Eigen::Index measurements = 0;
  int cg_iterations = 0;
  double cg_residual = 0.0;
  bool cg_converged = true;
  int lanczos_steps = 0;
  bool lanczos_breakdown = false;
  double seconds = 0.0;  // wall time, not serialized
};

/// Training-side operators of a D-SKI fit: dW_f, K_uu and A. Pinned in memory
/// because A refers to the other two.
class DskiSystem {
 public:
  DskiSystem(const TrainingSet& train, const InducingGrid& grid, const Hyperparameters& hyp,
             double relative_jitter = kDefaultRelativeJitter);
  DskiSystem(const DskiSystem&) = delete;
  DskiSystem& operator=(const DskiSystem&) = delete;

  const SparseDerivativeInterpolation& interpolation() const { return dw_; }
  const KroneckerKernel& kernel() const { return kuu_; }
  const AOperator& op() const { return a_; }

  /// Solves A alpha = rhs by PCG.
  CgResult solve(const Eigen::VectorXd& rhs, const CgOptions& cg, bool precondition) const;

 private:
  SparseDerivativeInterpolation dw_;
  KroneckerKernel kuu_;
  AOperator a_;
};

struct VarianceEstimate {
  Mat3 covariance = Mat3::Zero();
  bool clamped = false;  // a diagonal entry went negative and was set to 0
};

/// Sets negative diagonal entries to 0; true if any was changed.
bool clamp_diagonal(Mat3& covariance);

/// Trained map: everything needed for constant-time queries. The training data
/// is not retained.
class FittedMap {
 public:
  const InducingGrid& grid() const { return grid_; }
  const Hyperparameters& hyperparameters() const { return hyp_; }
  double relative_jitter() const { return jitter_; }
  const FitDiagnostics& diagnostics() const { return diag_; }
  /// Component means removed from the training data; added back to every
  /// predicted mean.
  const Vec3& offset() const { return offset_; }
  /// c = K_uu dW_f^T alpha.
  const Eigen::VectorXd& mean_cache() const { return mean_cache_; }
  /// R = K_uu dW_f^T Q_T, M_ind x T.
  const RowMatrixXd& love_factors() const { return love_; }
  const Tridiagonal& tridiagonal() const { return tridiagonal_; }
  bool has_variance() const { return has_variance_; }

  /// dw(p) c + offset; uses only the 64-point stencil of p.
  Vec3 predict_mean(const Vec3& p) const;
  /// dw K_uu dw^T - dw R T^{-1} R^T dw^T, diagonal clamped at 0 with a flag.
  VarianceEstimate predict_variance(const Vec3& p) const;
  /// The first term of predict_variance alone.
  Mat3 prior_variance(const Vec3& p) const;

  MapTable predict_grid(const Lattice& lattice) const;

  /// Little-endian binary container tagged "MAGMAP01".
  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static FittedMap load(std::istream& in);
  static FittedMap load(const std::string& path);

 private:
  friend FittedMap fit_dski(const TrainingSet&, const InducingGrid&, const Hyperparameters&, const FitOptions&);
  void finalize();

  InducingGrid grid_;
  Hyperparameters hyp_;
  double jitter_ = kDefaultRelativeJitter;
  Vec3 offset_ = Vec3::Zero();
  KroneckerKernel kuu_;
  Eigen::VectorXd mean_cache_;
  bool has_variance_ = false;
  RowMatrixXd love_;
  Tridiagonal tridiagonal_;
  TridiagonalLdlt ldlt_;
  FitDiagnostics diag_;
};

/// Solves A alpha = vec(Y^T) by PCG, then runs Lanczos on A and caches the
/// LOVE factors. A non-converged CG is reported in diagnostics, not thrown.
FittedMap fit_dski(const TrainingSet& train, const InducingGrid& grid, const Hyperparameters& hyp,
                   const FitOptions& options = {});

}  // namespace magmap
