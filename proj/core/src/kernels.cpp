#include "magmap/kernels.hpp"

#include <cmath>

namespace magmap {

double se_kernel(const Vec3& p, const Vec3& q, const Hyperparameters& hyp) {
  const double l2 = hyp.length_scale * hyp.length_scale;
  return hyp.signal_variance * std::exp(-(p - q).squaredNorm() / (2.0 * l2));
}

Mat3 curlfree_block(const Vec3& p, const Vec3& q, const Hyperparameters& hyp) {
  const double l2 = hyp.length_scale * hyp.length_scale;
  const Vec3 tau = p - q;
  const double k = hyp.signal_variance * std::exp(-tau.squaredNorm() / (2.0 * l2));
  return (k / l2) * (Mat3::Identity() - tau * tau.transpose() / l2);
}

double factor_kernel_1d(double x, double x_prime, int dims, const Hyperparameters& hyp) {
  if (dims < 1) throw InvalidArgument("factor_kernel_1d: dims must be >= 1");
  const double d = x - x_prime;
  const double scale = std::pow(hyp.signal_variance, 1.0 / dims);
  return scale * std::exp(-d * d / (2.0 * hyp.length_scale * hyp.length_scale));
}

Eigen::MatrixXd curlfree_gram(const Points& a, const Points& b, const Hyperparameters& hyp) {
  Eigen::MatrixXd k(3 * a.rows(), 3 * b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    const Vec3 q = b.row(j).transpose();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      k.block<3, 3>(3 * i, 3 * j) = curlfree_block(a.row(i).transpose(), q, hyp);
    }
  }
  return k;
}

Eigen::MatrixXd curlfree_gram(const Points& a, const Hyperparameters& hyp) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd k(3 * n, 3 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec3 q = a.row(j).transpose();
    for (Eigen::Index i = j; i < n; ++i) {
      const Mat3 block = curlfree_block(a.row(i).transpose(), q, hyp);
      k.block<3, 3>(3 * i, 3 * j) = block;
      if (i != j) k.block<3, 3>(3 * j, 3 * i) = block.transpose();
    }
  }
  return k;
}

}  // namespace magmap
