#include "magmap/exact_gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "magmap/kernels.hpp"

namespace magmap {

namespace {

constexpr Eigen::Index kQueryChunk = 256;

void check_cap(Eigen::Index dim, const DenseOptions& options, const char* what) {
  if (dim > options.max_dimension) {
    throw CapacityError(std::string(what) + ": dense system of dimension " + std::to_string(dim) +
                        " exceeds the cap of " + std::to_string(options.max_dimension));
  }
}

// In-place lower Cholesky factor of `a`; throws FactorizationError on failure.
void cholesky_in_place(Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(std::string(what) +
                             ": Cholesky factorization failed (matrix not numerically positive definite); "
                             "increase the jitter");
  }
  a.triangularView<Eigen::StrictlyUpper>().setZero();
}

Eigen::MatrixXd noisy_gram(const TrainingSet& train, const Hyperparameters& hyp, const DenseOptions& options) {
  Eigen::MatrixXd a = curlfree_gram(train.positions, hyp);
  a.diagonal().array() += hyp.noise_variance + options.relative_jitter * hyp.signal_variance;
  return a;
}

Mat3 prior_block(const Hyperparameters& hyp) {
  return (hyp.signal_variance / (hyp.length_scale * hyp.length_scale)) * Mat3::Identity();
}

}  // namespace

ExactModel fit_exact(const TrainingSet& train, const Hyperparameters& hyp, const DenseOptions& options) {
  hyp.validate();
  train.validate();
  check_cap(3 * train.size(), options, "fit_exact");
  ExactModel model;
  model.positions_ = train.positions;
  model.hyp_ = hyp;
  model.factor_ = noisy_gram(train, hyp, options);
  cholesky_in_place(model.factor_, "fit_exact");
  model.alpha_ = model.solve(stacked(train.measurements));
  return model;
}

Eigen::VectorXd ExactModel::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != factor_.rows()) throw InvalidArgument("ExactModel::solve: length mismatch");
  Eigen::VectorXd x = factor_.triangularView<Eigen::Lower>().solve(rhs);
  factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

Eigen::MatrixXd ExactModel::reconstruct() const { return factor_ * factor_.transpose(); }

Prediction ExactModel::predict(const Points& query) const {
  const Eigen::Index nq = query.rows();
  Prediction out;
  out.mean = Points::Zero(nq, 3);
  out.prior.assign(static_cast<std::size_t>(nq), prior_block(hyp_));
  out.covariance = out.prior;
  if (size() == 0) return out;

  for (Eigen::Index start = 0; start < nq; start += kQueryChunk) {
    const Eigen::Index count = std::min(kQueryChunk, nq - start);
    const Points chunk = query.middleRows(start, count);
    const Eigen::MatrixXd cross = curlfree_gram(positions_, chunk, hyp_);  // 3N x 3c
    const Eigen::VectorXd mean = cross.transpose() * alpha_;
    const Eigen::MatrixXd v = factor_.triangularView<Eigen::Lower>().solve(cross);
    for (Eigen::Index i = 0; i < count; ++i) {
      out.mean.row(start + i) = mean.segment<3>(3 * i).transpose();
      const auto vi = v.middleCols<3>(3 * i);
      out.covariance[static_cast<std::size_t>(start + i)] -= vi.transpose() * vi;
    }
  }
  return out;
}

Prediction predict_exact(const ExactModel& model, const Points& query) { return model.predict(query); }

double nlml_exact(const TrainingSet& train, const Hyperparameters& hyp, const DenseOptions& options) {
  hyp.validate();
  train.validate();
  check_cap(3 * train.size(), options, "nlml_exact");
  const Eigen::Index dim = 3 * train.size();
  if (dim == 0) return 0.0;
  Eigen::MatrixXd l = noisy_gram(train, hyp, options);
  cholesky_in_place(l, "nlml_exact");
  const Eigen::VectorXd w = l.triangularView<Eigen::Lower>().solve(stacked(train.measurements));
  const double log_det_half = l.diagonal().array().log().sum();
  return 0.5 * w.squaredNorm() + log_det_half + 0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
}

namespace {

struct SearchState {
  const TrainingSet* data;
  const DenseOptions* options;
  int budget;
  int evaluations = 0;
  double best_value = std::numeric_limits<double>::infinity();
  Hyperparameters best{};
};

constexpr double kRejected = 1e300;

Hyperparameters from_log(const gsl_vector* x) {
  return {std::exp(gsl_vector_get(x, 0)), std::exp(gsl_vector_get(x, 1)), std::exp(gsl_vector_get(x, 2))};
}

double search_objective(const gsl_vector* x, void* params) {
  auto* state = static_cast<SearchState*>(params);
  if (state->evaluations >= state->budget) return kRejected;
  ++state->evaluations;
  const Hyperparameters hyp = from_log(x);
  double value = kRejected;
  try {
    hyp.validate();
    value = nlml_exact(*state->data, hyp, *state->options);
  } catch (const Error&) {
    return kRejected;
  }
  if (!std::isfinite(value)) return kRejected;
  if (value < state->best_value) {
    state->best_value = value;
    state->best = hyp;
  }
  return value;
}

}  // namespace

TrainingResult train_hyperparameters(const TrainingSet& subset, const Hyperparameters& init,
                                     const SearchOptions& search, const DenseOptions& options) {
  init.validate();
  if (search.max_evaluations < 1) throw InvalidArgument("train_hyperparameters: need at least one evaluation");
  TrainingResult result;
  result.initial_nlml = nlml_exact(subset, init, options);
  if (!std::isfinite(result.initial_nlml)) throw NumericalError("train_hyperparameters: NLML at init is not finite");

  SearchState state{&subset, &options, search.max_evaluations - 1};
  state.best = init;
  state.best_value = result.initial_nlml;

  gsl_set_error_handler_off();
  gsl_vector* x = gsl_vector_alloc(3);
  gsl_vector* step = gsl_vector_alloc(3);
  gsl_vector_set(x, 0, std::log(init.length_scale));
  gsl_vector_set(x, 1, std::log(init.signal_variance));
  gsl_vector_set(x, 2, std::log(init.noise_variance));
  gsl_vector_set_all(step, search.initial_step);
  gsl_multimin_function fn{&search_objective, 3, &state};
  gsl_multimin_fminimizer* minimizer = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
  if (gsl_multimin_fminimizer_set(minimizer, &fn, x, step) == GSL_SUCCESS) {
    while (state.evaluations < state.budget) {
      if (gsl_multimin_fminimizer_iterate(minimizer) != GSL_SUCCESS) break;
      if (gsl_multimin_fminimizer_size(minimizer) < search.size_tolerance) break;
    }
  }
  gsl_multimin_fminimizer_free(minimizer);
  gsl_vector_free(step);
  gsl_vector_free(x);

  result.hyperparameters = state.best;
  result.nlml = state.best_value;
  result.evaluations = state.evaluations + 1;
  return result;
}

namespace {

// Covariance between the latent potential at grid node u and the observed
// field -grad(phi) at p: k(p, u) (p - u) / l^2.
Eigen::MatrixXd potential_cross(const InducingGrid& grid, const Points& points, const Hyperparameters& hyp) {
  const double l2 = hyp.length_scale * hyp.length_scale;
  Eigen::MatrixXd k(grid.size(), 3 * points.rows());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const Vec3 u = grid.node(j);
    for (Eigen::Index n = 0; n < points.rows(); ++n) {
      const Vec3 p = points.row(n).transpose();
      const Vec3 tau = p - u;
      const double kv = hyp.signal_variance * std::exp(-tau.squaredNorm() / (2.0 * l2));
      k.block<1, 3>(j, 3 * n) = (kv / l2) * tau.transpose();
    }
  }
  return k;
}

}  // namespace

Prediction predict_sor(const TrainingSet& train, const InducingGrid& grid, const Hyperparameters& hyp,
                       const Points& query, const SorOptions& options) {
  hyp.validate();
  train.validate();
  check_cap(3 * train.size(), options.dense, "predict_sor");
  if (grid.size() > options.max_inducing) {
    throw CapacityError("predict_sor: " + std::to_string(grid.size()) + " inducing points exceed the cap of " +
                        std::to_string(options.max_inducing));
  }
  const Eigen::Index m = grid.size();
  Eigen::MatrixXd kuu(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Vec3 uj = grid.node(j);
    for (Eigen::Index i = j; i < m; ++i) kuu(i, j) = kuu(j, i) = se_kernel(grid.node(i), uj, hyp);
    kuu(j, j) += options.dense.relative_jitter * hyp.signal_variance;
  }
  try {
    cholesky_in_place(kuu, "predict_sor K_uu");
  } catch (const FactorizationError&) {
    throw FactorizationError("predict_sor: K_uu is numerically singular; increase the jitter");
  }
  const auto l = std::as_const(kuu).triangularView<Eigen::Lower>();

  // With V = L^{-1} K_uf the SoR kernel on the data is V^T V.
  const Eigen::MatrixXd v = l.solve(potential_cross(grid, train.positions, hyp));
  Eigen::MatrixXd s = v.transpose() * v;
  s.diagonal().array() += hyp.noise_variance + options.dense.relative_jitter * hyp.signal_variance;
  cholesky_in_place(s, "predict_sor");
  const auto ls = std::as_const(s).triangularView<Eigen::Lower>();
  Eigen::VectorXd weights = ls.solve(stacked(train.measurements));
  ls.transpose().solveInPlace(weights);

  const Eigen::Index nq = query.rows();
  Prediction out;
  out.mean = Points::Zero(nq, 3);
  out.covariance.resize(static_cast<std::size_t>(nq));
  out.prior.resize(static_cast<std::size_t>(nq));
  for (Eigen::Index start = 0; start < nq; start += kQueryChunk) {
    const Eigen::Index count = std::min(kQueryChunk, nq - start);
    const Eigen::MatrixXd vq = l.solve(potential_cross(grid, query.middleRows(start, count), hyp));
    const Eigen::MatrixXd cross = v.transpose() * vq;  // SoR K_f*
    const Eigen::VectorXd mean = cross.transpose() * weights;
    const Eigen::MatrixXd h = ls.solve(cross);
    for (Eigen::Index i = 0; i < count; ++i) {
      const auto idx = static_cast<std::size_t>(start + i);
      out.mean.row(start + i) = mean.segment<3>(3 * i).transpose();
      const auto vi = vq.middleCols<3>(3 * i);
      const auto hi = h.middleCols<3>(3 * i);
      out.prior[idx] = vi.transpose() * vi;
      out.covariance[idx] = out.prior[idx] - hi.transpose() * hi;
    }
  }
  return out;
}

TrainingSet downsample_baseline(const TrainingSet& train, Eigen::Index n, std::uint64_t seed) {
  if (n < 0 || n > train.size()) {
    throw InvalidArgument("downsample_baseline: requested " + std::to_string(n) + " of " +
                          std::to_string(train.size()) + " points");
  }
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(train.size()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(static_cast<std::size_t>(n));
  std::sort(rows.begin(), rows.end());
  return select_rows(train, rows);
}

}  // namespace magmap
