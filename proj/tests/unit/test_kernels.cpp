#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "magmap/kernels.hpp"
#include "support.hpp"

using namespace magmap;
using magmap::test::Gen;

namespace {

using Vec3L = Eigen::Matrix<long double, 3, 1>;

// Extended-precision SE kernel; a double second difference at step 1e-5
// would lose about 1e-6 to cancellation alone.
long double se_long(const Vec3L& p, const Vec3L& q, const Hyperparameters& hyp) {
  const long double l = hyp.length_scale;
  return static_cast<long double>(hyp.signal_variance) * std::exp(-(p - q).squaredNorm() / (2 * l * l));
}

// d^2 k / dp_i dq_j by central differences; the curl-free block is the
// covariance of -grad, whose two minus signs cancel.
Mat3 fd_block(const Vec3& pd, const Vec3& qd, const Hyperparameters& hyp, double hd) {
  const Vec3L p = pd.cast<long double>(), q = qd.cast<long double>();
  const long double h = hd;
  Mat3 out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec3L ei = Vec3L::Unit(i) * h;
      const Vec3L ej = Vec3L::Unit(j) * h;
      out(i, j) = static_cast<double>((se_long(p + ei, q + ej, hyp) - se_long(p + ei, q - ej, hyp) -
                                       se_long(p - ei, q + ej, hyp) + se_long(p - ei, q - ej, hyp)) /
                                      (4 * h * h));
    }
  }
  return out;
}

}  // namespace

TEST(SeKernel, ZeroDistanceIsSignalVariance) {
  const Hyperparameters hyp{1.3, 0.7, 0.01};
  const Vec3 p(0.2, -1.0, 3.0);
  EXPECT_DOUBLE_EQ(se_kernel(p, p, hyp), 0.7);
}

TEST(SeKernel, HandValue) {
  const Hyperparameters hyp{2.0, 1.0, 0.01};
  EXPECT_NEAR(se_kernel(Vec3::Zero(), Vec3(2, 0, 0), hyp), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(se_kernel(Vec3::Zero(), Vec3(2, 0, 0), hyp), 0.60653, 1e-5);
}

TEST(SeKernel, SymmetricAndBounded) {
  Gen g(1);
  for (int t = 0; t < 200; ++t) {
    const auto hyp = g.hyper();
    const Vec3 p = g.point(-5, 5), q = g.point(-5, 5);
    const double k = se_kernel(p, q, hyp);
    EXPECT_EQ(k, se_kernel(q, p, hyp));
    EXPECT_GT(k, 0.0);
    EXPECT_LE(k, hyp.signal_variance);
  }
}

TEST(CurlFreeBlock, CoincidentPointsGiveScaledIdentity) {
  const Hyperparameters hyp{2.0, 1.5, 0.01};
  const Vec3 p(1, 2, 3);
  EXPECT_TRUE(curlfree_block(p, p, hyp).isApprox(Mat3::Identity() * 1.5 / 4.0, 1e-15));
  EXPECT_LT((curlfree_block(p, p, hyp) - fd_block(p, p, hyp, 1e-4)).norm(), 1e-6);
}

TEST(CurlFreeBlock, TransposeSymmetry) {
  Gen g(2);
  for (int t = 0; t < 100; ++t) {
    const auto hyp = g.hyper();
    const Vec3 p = g.point(-3, 3), q = g.point(-3, 3);
    EXPECT_LT((curlfree_block(p, q, hyp) - curlfree_block(q, p, hyp).transpose()).cwiseAbs().maxCoeff(), 1e-15);
    const Mat3 self = curlfree_block(p, p, hyp);
    EXPECT_EQ(self, self.transpose());
  }
}

TEST(CurlFreeBlock, MatchesFiniteDifferences) {
  Gen g(3);
  for (int t = 0; t < 100; ++t) {
    const auto hyp = g.hyper();
    const Vec3 p = g.point(-2, 2), q = g.point(-2, 2);
    EXPECT_NEAR(se_kernel(p, q, hyp), static_cast<double>(se_long(p.cast<long double>(), q.cast<long double>(), hyp)),
                1e-15);
    const Mat3 analytic = curlfree_block(p, q, hyp);
    const Mat3 fd = fd_block(p, q, hyp, 1e-5);
    const double scale = hyp.signal_variance / (hyp.length_scale * hyp.length_scale);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        EXPECT_NEAR(analytic(i, j), fd(i, j), 1e-6 * std::max(std::abs(analytic(i, j)), scale))
            << "entry " << i << "," << j << " trial " << t;
      }
    }
  }
}

TEST(FactorKernel, ZeroDistanceAndDegenerateDimension) {
  const Hyperparameters hyp{1.7, 2.5, 0.01};
  EXPECT_NEAR(factor_kernel_1d(0.4, 0.4, 3, hyp), std::cbrt(2.5), 1e-15);
  for (double x : {-1.0, 0.0, 0.3, 2.0}) {
    EXPECT_NEAR(factor_kernel_1d(x, 0.5, 1, hyp), se_kernel(Vec3(x, 0, 0), Vec3(0.5, 0, 0), hyp), 1e-15);
  }
  EXPECT_THROW(factor_kernel_1d(0, 0, 0, hyp), InvalidArgument);
}

TEST(FactorKernel, ProductEqualsSeKernel) {
  Gen g(4);
  for (int t = 0; t < 500; ++t) {
    const auto hyp = g.hyper();
    const Vec3 p = g.point(-4, 4), q = g.point(-4, 4);
    double prod = 1.0;
    for (int d = 0; d < 3; ++d) prod *= factor_kernel_1d(p[d], q[d], 3, hyp);
    EXPECT_NEAR(prod, se_kernel(p, q, hyp), 1e-14 * hyp.signal_variance);
  }
}

TEST(CurlFreeGram, SymmetricPositiveSemidefinite) {
  Gen g(5);
  for (int t = 0; t < 20; ++t) {
    const auto hyp = g.hyper();
    const Points pts = g.points(g.integer(1, 20), Vec3::Constant(-3), Vec3::Constant(3));
    const Eigen::MatrixXd k = curlfree_gram(pts, hyp);
    EXPECT_EQ(k, k.transpose());
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues().minCoeff();
    EXPECT_GE(min_eig, -1e-8 * hyp.signal_variance);
    EXPECT_TRUE(curlfree_gram(pts, pts, hyp).isApprox(k, 1e-14));
  }
}

TEST(CurlFreeGram, BlockLayoutIsPointMajor) {
  const Hyperparameters hyp{1.0, 1.0, 0.01};
  Points a(2, 3), b(3, 3);
  a << 0, 0, 0, 1, 0.5, -0.2;
  b << 0.3, 0.1, 0, -1, 2, 0.4, 0.2, 0.2, 0.2;
  const Eigen::MatrixXd k = curlfree_gram(a, b, hyp);
  ASSERT_EQ(k.rows(), 6);
  ASSERT_EQ(k.cols(), 9);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_TRUE((k.block<3, 3>(3 * i, 3 * j).isApprox(curlfree_block(a.row(i), b.row(j), hyp), 1e-15)));
    }
  }
}
