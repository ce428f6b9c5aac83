#pragma once

#include "magmap/types.hpp"

namespace magmap {

/// sigma_f^2 * exp(-|p - q|^2 / (2 l^2)).
double se_kernel(const Vec3& p, const Vec3& q, const Hyperparameters& hyp);

/// Curl-free covariance block grad_p k(p, q) grad_q^T, i.e. the covariance of
/// -grad(phi) at p and q when phi has the squared-exponential covariance:
///
///   k(p, q) / l^2 * (I - tau tau^T / l^2),   tau = p - q.
Mat3 curlfree_block(const Vec3& p, const Vec3& q, const Hyperparameters& hyp);

/// One factor of the product decomposition of se_kernel over `dims` input
/// dimensions; its signal variance is sigma_f^(2/dims).
double factor_kernel_1d(double x, double x_prime, int dims, const Hyperparameters& hyp);

/// Dense 3Na x 3Nb matrix of curl-free blocks, rows ordered point-major.
Eigen::MatrixXd curlfree_gram(const Points& a, const Points& b, const Hyperparameters& hyp);

/// Symmetric 3N x 3N version of curlfree_gram(a, a); fills both triangles.
Eigen::MatrixXd curlfree_gram(const Points& a, const Hyperparameters& hyp);

}  // namespace magmap
