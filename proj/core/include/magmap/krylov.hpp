#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "magmap/grid.hpp"

namespace magmap {

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// (K1 (x) K2 (x) K3) v by three reshape-multiply passes, O(M_ind * sum M^(d)).
Eigen::VectorXd kron_mvm(const KroneckerKernel& k, const Eigen::Ref<const Eigen::VectorXd>& v);

/// Column-wise kron_mvm of an M_ind x T matrix.
Eigen::MatrixXd kron_mvm_columns(const KroneckerKernel& k, const Eigen::Ref<const Eigen::MatrixXd>& v);

/// 3x3 block dw_a K dw_b^T for two derivative stencils, evaluated through the
/// separable structure of K and of the stencil weights (O(1) per block).
Mat3 stencil_gram(const KroneckerKernel& k, const Stencil& a, const Stencil& b);

/// A = dW K_uu dW^T + sigma_y^2 I, applied without forming any 3N x 3N matrix.
/// Holds references; the interpolation matrix and kernel must outlive it.
class AOperator {
 public:
  AOperator(const SparseDerivativeInterpolation& dw, const KroneckerKernel& kuu, double noise_variance);

  Eigen::Index size() const { return dw_->rows(); }
  double noise_variance() const { return noise_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// Exact diag(A), one separable 3x3 block per measurement.
  Eigen::VectorXd diagonal() const;
  LinearOperator as_operator() const;

 private:
  const SparseDerivativeInterpolation* dw_;
  const KroneckerKernel* kuu_;
  double noise_;
};

struct CgOptions {
  double tolerance = 1e-4;  // relative residual |b - Ax| / |b|
  int max_iterations = 10000;
};

struct CgResult {
  Eigen::VectorXd solution;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
  std::vector<double> residual_history;  // relative residuals, starting with 1 at x = 0
};

/// Preconditioned conjugate gradients for SPD `a`. An empty preconditioner
/// means identity. Hitting max_iterations returns converged == false; non-finite
/// values or non-positive curvature throw NumericalError.
CgResult pcg(const LinearOperator& a, const Eigen::VectorXd& b, const CgOptions& options,
             const LinearOperator& preconditioner = {});

/// Multiplication by the inverse of a positive diagonal.
LinearOperator jacobi_preconditioner(const Eigen::VectorXd& diagonal);

struct Tridiagonal {
  Eigen::VectorXd diagonal;
  Eigen::VectorXd off_diagonal;  // length size() - 1

  Eigen::Index size() const { return diagonal.size(); }
  Eigen::MatrixXd dense() const;
};

struct LanczosFactors {
  Eigen::MatrixXd basis;  // 3N x T, orthonormal columns
  Tridiagonal tridiagonal;
  double next_beta = 0.0;  // norm of the residual term A Q - Q T
  bool breakdown = false;  // stopped early on an invariant subspace

  int steps() const { return static_cast<int>(basis.cols()); }
};

/// Lanczos tridiagonalization with full reorthogonalization (two Gram-Schmidt
/// passes against every previous vector per step).
LanczosFactors lanczos(const LinearOperator& a, const Eigen::VectorXd& start, int steps);

/// LDL^T factorization of a symmetric positive definite tridiagonal matrix.
class TridiagonalLdlt {
 public:
  TridiagonalLdlt() = default;
  explicit TridiagonalLdlt(const Tridiagonal& t);

  Eigen::Index size() const { return d_.size(); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

 private:
  Eigen::VectorXd d_;
  Eigen::VectorXd l_;
};

Eigen::MatrixXd tridiag_solve(const Tridiagonal& t, const Eigen::MatrixXd& rhs);

}  // namespace magmap
