#include "magmap/krylov.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace magmap {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite value encountered");
}

}  // namespace

Eigen::VectorXd kron_mvm(const KroneckerKernel& k, const Eigen::Ref<const Eigen::VectorXd>& v) {
  const Eigen::Index m1 = k.factors[0].rows(), m2 = k.factors[1].rows(), m3 = k.factors[2].rows();
  if (v.size() != m1 * m2 * m3) {
    throw InvalidArgument("kron_mvm: vector length " + std::to_string(v.size()) + " does not match grid size " +
                          std::to_string(m1 * m2 * m3));
  }
  // Last axis: rows of the (M1 M2) x M3 view times K3^T.
  Eigen::Map<const RowMatrix> x(v.data(), m1 * m2, m3);
  RowMatrix y = x * k.factors[2].transpose();
  // Middle axis: each M2 x M3 slab premultiplied by K2.
  RowMatrix z(m1 * m2, m3);
  for (Eigen::Index i = 0; i < m1; ++i) {
    Eigen::Map<const RowMatrix> slab(y.data() + i * m2 * m3, m2, m3);
    Eigen::Map<RowMatrix> dst(z.data() + i * m2 * m3, m2, m3);
    dst.noalias() = k.factors[1] * slab;
  }
  // First axis: the M1 x (M2 M3) view premultiplied by K1.
  Eigen::VectorXd out(v.size());
  Eigen::Map<RowMatrix>(out.data(), m1, m2 * m3).noalias() =
      k.factors[0] * Eigen::Map<const RowMatrix>(z.data(), m1, m2 * m3);
  return out;
}

Eigen::MatrixXd kron_mvm_columns(const KroneckerKernel& k, const Eigen::Ref<const Eigen::MatrixXd>& v) {
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c) out.col(c) = kron_mvm(k, Eigen::VectorXd(v.col(c)));
  return out;
}

Mat3 stencil_gram(const KroneckerKernel& k, const Stencil& a, const Stencil& b) {
  // forms[d](0) = value-value, (1) = deriv-value, (2) = value-deriv, (3) = deriv-deriv
  std::array<std::array<double, 4>, 3> forms{};
  for (std::size_t d = 0; d < 3; ++d) {
    const auto& kd = k.factors[d];
    const auto& wa = a.weights[d];
    const auto& wb = b.weights[d];
    Eigen::Matrix4d block;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) block(i, j) = kd(a.base[d] + i, b.base[d] + j);
    }
    const Eigen::Map<const Eigen::Vector4d> va(wa.value.data()), da(wa.derivative.data());
    const Eigen::Map<const Eigen::Vector4d> vb(wb.value.data()), db(wb.derivative.data());
    forms[d] = {va.dot(block * vb), da.dot(block * vb), va.dot(block * db), da.dot(block * db)};
  }
  Mat3 g;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double prod = 1.0;
      for (int d = 0; d < 3; ++d) {
        const int sel = (d == r ? 1 : 0) + (d == c ? 2 : 0);
        prod *= forms[static_cast<std::size_t>(d)][static_cast<std::size_t>(sel)];
      }
      g(r, c) = prod;  // the two negations folded into dW cancel
    }
  }
  return g;
}

AOperator::AOperator(const SparseDerivativeInterpolation& dw, const KroneckerKernel& kuu, double noise_variance)
    : dw_(&dw), kuu_(&kuu), noise_(noise_variance) {
  if (dw.cols() != kuu.size()) throw InvalidArgument("AOperator: interpolation columns do not match K_uu size");
  if (!(noise_variance >= 0.0)) throw InvalidArgument("AOperator: noise variance must be >= 0");
}

Eigen::VectorXd AOperator::apply(const Eigen::VectorXd& v) const {
  if (v.size() != size()) throw InvalidArgument("apply_A: length mismatch");
  Eigen::VectorXd grid_values(dw_->cols());
  dw_->apply_transpose(v, grid_values);
  const Eigen::VectorXd kv = kron_mvm(*kuu_, grid_values);
  Eigen::VectorXd out(size());
  dw_->apply(kv, out);
  out += noise_ * v;
  return out;
}

Eigen::VectorXd AOperator::diagonal() const {
  Eigen::VectorXd d(size());
  for (Eigen::Index n = 0; n < dw_->measurements(); ++n) {
    const Stencil& st = dw_->stencil(n);
    d.segment<3>(3 * n) = stencil_gram(*kuu_, st, st).diagonal().array() + noise_;
  }
  return d;
}

LinearOperator AOperator::as_operator() const {
  return [this](const Eigen::VectorXd& v) { return apply(v); };
}

CgResult pcg(const LinearOperator& a, const Eigen::VectorXd& b, const CgOptions& options,
             const LinearOperator& preconditioner) {
  if (!(options.tolerance > 0.0)) throw InvalidArgument("pcg: tolerance must be > 0");
  if (options.max_iterations < 0) throw InvalidArgument("pcg: max_iterations must be >= 0");
  CgResult result;
  result.solution = Eigen::VectorXd::Zero(b.size());
  const double b_norm = b.norm();
  check_finite(b_norm, "pcg right-hand side");
  if (b_norm == 0.0) {
    result.converged = true;
    return result;
  }
  auto precondition = [&](const Eigen::VectorXd& r) { return preconditioner ? preconditioner(r) : r; };
  result.residual_history.push_back(1.0);

  Eigen::VectorXd r = b;
  Eigen::VectorXd z = precondition(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int j = 1; j <= options.max_iterations; ++j) {
    const Eigen::VectorXd ap = a(p);
    const double curvature = p.dot(ap);
    check_finite(curvature, "pcg");
    if (!(curvature > 0.0)) throw NumericalError("pcg breakdown: non-positive curvature p^T A p");
    const double step = rz / curvature;
    result.solution += step * p;
    r -= step * ap;
    const double rel = r.norm() / b_norm;
    check_finite(rel, "pcg residual");
    result.residual_history.push_back(rel);
    result.iterations = j;
    result.relative_residual = rel;
    if (rel <= options.tolerance) {
      result.converged = true;
      return result;
    }
    z = precondition(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return result;
}

LinearOperator jacobi_preconditioner(const Eigen::VectorXd& diagonal) {
  if (!(diagonal.array() > 0.0).all()) throw NumericalError("Jacobi preconditioner: diagonal must be positive");
  Eigen::VectorXd inv = diagonal.cwiseInverse();
  return [inv = std::move(inv)](const Eigen::VectorXd& r) -> Eigen::VectorXd { return inv.cwiseProduct(r); };
}

Eigen::MatrixXd Tridiagonal::dense() const {
  const Eigen::Index n = size();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  t.diagonal() = diagonal;
  for (Eigen::Index i = 0; i + 1 < n; ++i) t(i, i + 1) = t(i + 1, i) = off_diagonal[i];
  return t;
}

LanczosFactors lanczos(const LinearOperator& a, const Eigen::VectorXd& start, int steps) {
  const Eigen::Index n = start.size();
  if (steps < 1) throw InvalidArgument("lanczos: need at least one step");
  if (steps > n) throw InvalidArgument("lanczos: steps exceed the operator dimension");
  const double start_norm = start.norm();
  check_finite(start_norm, "lanczos start vector");
  if (start_norm == 0.0) throw InvalidArgument("lanczos: zero start vector");

  Eigen::MatrixXd q(n, steps);
  Eigen::VectorXd alpha(steps);
  Eigen::VectorXd beta(steps);
  q.col(0) = start / start_norm;
  double scale = 0.0;
  int done = steps;
  bool breakdown = false;
  for (int t = 0; t < steps; ++t) {
    Eigen::VectorXd w = a(q.col(t));
    alpha[t] = q.col(t).dot(w);
    check_finite(alpha[t], "lanczos");
    w -= alpha[t] * q.col(t);
    if (t > 0) w -= beta[t - 1] * q.col(t - 1);
    auto basis = q.leftCols(t + 1);
    for (int pass = 0; pass < 2; ++pass) w.noalias() -= basis * (basis.transpose() * w);
    beta[t] = w.norm();
    scale = std::max(scale, std::abs(alpha[t]) + beta[t] + (t > 0 ? beta[t - 1] : 0.0));
    if (t + 1 == steps) break;
    if (beta[t] <= 1e-12 * scale) {
      done = t + 1;
      breakdown = true;
      break;
    }
    q.col(t + 1) = w / beta[t];
  }

  LanczosFactors f;
  f.basis = q.leftCols(done);
  f.tridiagonal.diagonal = alpha.head(done);
  f.tridiagonal.off_diagonal = beta.head(done - 1);
  f.next_beta = beta[done - 1];
  f.breakdown = breakdown;
  return f;
}

TridiagonalLdlt::TridiagonalLdlt(const Tridiagonal& t) {
  const Eigen::Index n = t.size();
  if (n == 0) return;
  if (t.off_diagonal.size() != n - 1) throw InvalidArgument("tridiagonal: off-diagonal length must be size - 1");
  const double scale = t.diagonal.cwiseAbs().maxCoeff() + (n > 1 ? t.off_diagonal.cwiseAbs().maxCoeff() : 0.0);
  d_.resize(n);
  l_.resize(std::max<Eigen::Index>(n - 1, 0));
  d_[0] = t.diagonal[0];
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i > 0) {
      l_[i - 1] = t.off_diagonal[i - 1] / d_[i - 1];
      d_[i] = t.diagonal[i] - l_[i - 1] * t.off_diagonal[i - 1];
    }
    if (!(d_[i] > std::numeric_limits<double>::epsilon() * scale)) {
      throw NumericalError("tridiagonal matrix is singular or indefinite at pivot " + std::to_string(i) +
                           "; increase jitter or use fewer Lanczos steps");
    }
  }
}

Eigen::MatrixXd TridiagonalLdlt::solve(const Eigen::MatrixXd& rhs) const {
  const Eigen::Index n = size();
  if (rhs.rows() != n) throw InvalidArgument("tridiagonal solve: row count mismatch");
  Eigen::MatrixXd x = rhs;
  for (Eigen::Index i = 1; i < n; ++i) x.row(i) -= l_[i - 1] * x.row(i - 1);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) /= d_[i];
  for (Eigen::Index i = n - 2; i >= 0; --i) x.row(i) -= l_[i] * x.row(i + 1);
  return x;
}

Eigen::MatrixXd tridiag_solve(const Tridiagonal& t, const Eigen::MatrixXd& rhs) {
  return TridiagonalLdlt(t).solve(rhs);
}

}  // namespace magmap
