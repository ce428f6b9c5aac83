#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "magmap/data.hpp"
#include "magmap/exact_gp.hpp"
#include "magmap/kernels.hpp"
#include "support.hpp"

using namespace magmap;
using magmap::test::Gen;

namespace {

TrainingSet random_set(Gen& g, Eigen::Index n, double extent) {
  TrainingSet t;
  t.positions = g.points(n, Vec3::Constant(-extent), Vec3::Constant(extent));
  t.measurements = g.points(n, Vec3::Constant(-1), Vec3::Constant(1));
  return t;
}

double min_eigenvalue(const Mat3& m) {
  return Eigen::SelfAdjointEigenSolver<Mat3>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
}

}  // namespace

TEST(FitExact, EmptyDataRevertsToPrior) {
  TrainingSet empty;
  empty.positions.resize(0, 3);
  empty.measurements.resize(0, 3);
  const Hyperparameters hyp{2.0, 1.5, 0.01};
  const auto model = fit_exact(empty, hyp);
  Points q(2, 3);
  q << 0, 0, 0, 3, 1, 2;
  const auto p = predict_exact(model, q);
  EXPECT_EQ(p.mean, Points::Zero(2, 3));
  for (const auto& c : p.covariance) EXPECT_TRUE(c.isApprox(Mat3::Identity() * 1.5 / 4.0, 1e-15));
}

TEST(FitExact, SinglePointHandSolve) {
  const Hyperparameters hyp{1.5, 2.0, 0.3};
  TrainingSet one;
  one.positions = Points(1, 3);
  one.positions << 0.1, 0.2, 0.3;
  one.measurements = Points(1, 3);
  one.measurements << 0.5, -1.0, 2.0;
  const auto p = predict_exact(fit_exact(one, hyp), one.positions);
  const double prior = hyp.signal_variance / (hyp.length_scale * hyp.length_scale);
  const double gain = prior / (prior + hyp.noise_variance + kDefaultRelativeJitter * hyp.signal_variance);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(p.mean(0, c), one.measurements(0, c) * gain, 1e-12);
  EXPECT_NEAR(p.covariance[0](0, 0), prior - prior * gain, 1e-12);
}

TEST(FitExact, SolveRoundTripAndFactorAccuracy) {
  Gen g(40);
  const Hyperparameters hyp{2.0, 1.0, 0.01};
  const auto set = random_set(g, 50, 5);
  const auto model = fit_exact(set, hyp);
  Eigen::MatrixXd a = curlfree_gram(set.positions, hyp);
  a.diagonal().array() += hyp.noise_variance + kDefaultRelativeJitter * hyp.signal_variance;
  const Eigen::VectorXd y = stacked(set.measurements);
  EXPECT_LE((a * model.solve(y) - y).norm(), 1e-8 * y.norm());
  EXPECT_LE((model.reconstruct() - a).norm(), 1e-8 * a.norm());
}

TEST(FitExact, CapacityGuard) {
  Gen g(41);
  const auto set = random_set(g, 30, 3);
  DenseOptions small;
  small.max_dimension = 60;
  EXPECT_THROW(fit_exact(set, {}, small), CapacityError);
  EXPECT_THROW(nlml_exact(set, {}, small), CapacityError);
}

TEST(PredictExact, FarQueryIsPrior) {
  Gen g(42);
  const Hyperparameters hyp{1.0, 1.0, 0.01};
  const auto set = random_set(g, 20, 2);
  Points q(1, 3);
  q << 30, 0, 0;
  const auto p = predict_exact(fit_exact(set, hyp), q);
  EXPECT_LE(p.mean.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((p.covariance[0] - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PredictExact, NoiselessInterpolatesTrainingPoints) {
  Gen g(43);
  const Hyperparameters hyp{1.0, 1.0, 1e-12};
  const auto set = random_set(g, 10, 4);
  DenseOptions opts;
  opts.relative_jitter = 1e-12;
  const auto p = predict_exact(fit_exact(set, hyp, opts), set.positions);
  EXPECT_LE((p.mean - set.measurements).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(PredictExact, ZeroDataAndLoewnerOrder) {
  Gen g(44);
  for (int t = 0; t < 5; ++t) {
    const auto hyp = g.hyper();
    auto set = random_set(g, 25, 3);
    const Points q = g.points(15, Vec3::Constant(-4), Vec3::Constant(4));
    const auto with_data = predict_exact(fit_exact(set, hyp), q);
    set.measurements.setZero();
    const auto zero = predict_exact(fit_exact(set, hyp), q);
    EXPECT_EQ(zero.mean, Points::Zero(15, 3));
    for (int i = 0; i < 15; ++i) {
      EXPECT_EQ(zero.covariance[static_cast<std::size_t>(i)], with_data.covariance[static_cast<std::size_t>(i)]);
      const Mat3& c = with_data.covariance[static_cast<std::size_t>(i)];
      EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_GE(min_eigenvalue(c), -1e-8);
      EXPECT_GE(min_eigenvalue(with_data.prior[static_cast<std::size_t>(i)] - c), -1e-8);
    }
  }
}

TEST(Nlml, PermutationInvariant) {
  Gen g(45);
  const auto set = random_set(g, 30, 3);
  std::vector<Eigen::Index> perm(30);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), g.engine());
  const Hyperparameters hyp{1.3, 0.9, 0.05};
  EXPECT_NEAR(nlml_exact(set, hyp), nlml_exact(select_rows(set, perm), hyp), 1e-8);
}

TEST(Nlml, SinglePointDiagonalGaussian) {
  const Hyperparameters hyp{2.0, 1.0, 0.1};
  TrainingSet one;
  one.positions = Points::Zero(1, 3);
  one.measurements = Points(1, 3);
  one.measurements << 0.3, -0.2, 0.5;
  DenseOptions opts;
  opts.relative_jitter = 0.0;
  const double var = 1.0 / 4.0 + 0.1;
  double expected = 0;
  for (int c = 0; c < 3; ++c) {
    const double y = one.measurements(0, c);
    expected += 0.5 * y * y / var + 0.5 * std::log(2 * std::numbers::pi * var);
  }
  EXPECT_NEAR(nlml_exact(one, hyp, opts), expected, 1e-12);
}

TEST(Nlml, ScalingIdentity) {
  Gen g(46);
  auto set = random_set(g, 15, 3);
  const Hyperparameters hyp{1.1, 0.7, 0.03};
  const double base = nlml_exact(set, hyp);
  set.measurements *= 2.0;
  const double scaled = nlml_exact(set, {hyp.length_scale, 4 * hyp.signal_variance, 4 * hyp.noise_variance});
  EXPECT_NEAR(scaled - base, 3 * 15 * std::log(2.0), 1e-8);
}

TEST(TrainHyperparameters, NeverWorseThanInit) {
  Gen g(47);
  const Points pos = g.points(60, Vec3(-5, -5, 0), Vec3(5, 5, 0.5));
  TrainingSet set;
  set.positions = pos;
  set.measurements = sample_curlfree_prior(pos, {2.0, 1.0, 0.01}, 3);
  const auto first = train_hyperparameters(set, {1.0, 0.5, 0.1}, {60});
  EXPECT_LE(first.nlml, first.initial_nlml);
  EXPECT_LE(first.evaluations, 60);
  const auto second = train_hyperparameters(set, first.hyperparameters, {40});
  EXPECT_LE(second.nlml, first.nlml + 1e-9);
}

TEST(TrainHyperparameters, RecoversLengthScale) {
  int within = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Gen g(100 + seed);
    const Points pos = g.points(400, Vec3(-10, -10, 0.01), Vec3(10, 10, 0.01));
    TrainingSet set;
    set.positions = pos;
    set.measurements = sample_curlfree_prior(pos, {2.0, 1.0, 0.01}, seed);
    const auto r = train_hyperparameters(set, {1.0, 0.5, 0.05});
    const double l = r.hyperparameters.length_scale;
    if (l > 2.0 / 1.5 && l < 2.0 * 1.5) ++within;
  }
  EXPECT_GE(within, 9);
}

TEST(PredictSor, DenseGridApproachesFullGp) {
  Gen g(48);
  const Hyperparameters hyp{1.5, 1.0, 0.01};
  TrainingSet set;
  set.positions = g.points(20, Vec3(0, 0, 0), Vec3(3, 3, 0.5));
  set.measurements = sample_curlfree_prior(set.positions, hyp, 4);
  const Points q = g.points(20, Vec3(0, 0, 0), Vec3(3, 3, 0.5));
  const auto grid = build_grid({Interval{0, 3}, Interval{0, 3}, Interval{0, 0.5}}, {16, 16, 8}, {2, 2, 2});
  const auto sor = predict_sor(set, grid, hyp, q);
  const auto full = predict_exact(fit_exact(set, hyp), q);
  EXPECT_LE(rmse(sor.mean, full.mean), 1e-3);
}

TEST(PredictSor, ZeroDataAndPsdBlocks) {
  Gen g(49);
  const Hyperparameters hyp{1.0, 1.0, 0.02};
  TrainingSet set;
  set.positions = g.points(15, Vec3(0, 0, 0), Vec3(2, 2, 1));
  set.measurements = Points::Zero(15, 3);
  const auto grid = build_grid({Interval{0, 2}, Interval{0, 2}, Interval{0, 1}}, {8, 8, 6});
  const Points q = g.points(10, Vec3(0, 0, 0), Vec3(2, 2, 1));
  const auto p = predict_sor(set, grid, hyp, q);
  EXPECT_EQ(p.mean, Points::Zero(10, 3));
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_GE(min_eigenvalue(p.covariance[i]), -1e-8);
    EXPECT_GE(min_eigenvalue(p.prior[i] - p.covariance[i]), -1e-8);
  }
  SorOptions tiny;
  tiny.max_inducing = 100;
  EXPECT_THROW(predict_sor(set, grid, hyp, q, tiny), CapacityError);
}

TEST(Downsample, EdgeCasesAndDeterminism) {
  Gen g(50);
  const auto set = random_set(g, 40, 2);
  const auto all = downsample_baseline(set, 40, 1);
  EXPECT_EQ(all.positions, set.positions);
  EXPECT_EQ(downsample_baseline(set, 0, 1).size(), 0);
  const auto a = downsample_baseline(set, 17, 9), b = downsample_baseline(set, 17, 9);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_EQ(a.size(), 17);
  EXPECT_THROW(downsample_baseline(set, 41, 1), InvalidArgument);
}
