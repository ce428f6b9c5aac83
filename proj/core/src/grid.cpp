#include "magmap/grid.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "magmap/kernels.hpp"

namespace magmap {

namespace {

constexpr const char* kAxisName[3] = {"x", "y", "z"};

// Snap tolerance for points that sit on the first/last interpolable node up to
// rounding in (p - lower) / spacing.
constexpr double kEdgeSnap = 1e-9;

CubicWeights keys_weights(double s, double spacing) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  CubicWeights w;
  w.value = {0.5 * (-s3 + 2.0 * s2 - s), 0.5 * (3.0 * s3 - 5.0 * s2 + 2.0), 0.5 * (-3.0 * s3 + 4.0 * s2 + s),
             0.5 * (s3 - s2)};
  const double inv_h = 1.0 / spacing;
  w.derivative = {0.5 * (-3.0 * s2 + 4.0 * s - 1.0) * inv_h, 0.5 * (9.0 * s2 - 10.0 * s) * inv_h,
                  0.5 * (-9.0 * s2 + 8.0 * s + 1.0) * inv_h, 0.5 * (3.0 * s2 - 2.0 * s) * inv_h};
  return w;
}

}  // namespace

InducingGrid::InducingGrid(const std::array<GridAxis, 3>& axes) : axes_(axes) {
  for (int d = 0; d < 3; ++d) {
    const auto& a = axes_[static_cast<std::size_t>(d)];
    if (a.count < 1) throw InvalidArgument(std::string("grid axis ") + kAxisName[d] + ": count must be >= 1");
    if (!(std::isfinite(a.spacing) && a.spacing > 0.0) || !std::isfinite(a.lower)) {
      throw InvalidArgument(std::string("grid axis ") + kAxisName[d] + ": spacing must be finite and > 0");
    }
  }
}

Eigen::Index InducingGrid::size() const {
  return static_cast<Eigen::Index>(axes_[0].count) * axes_[1].count * axes_[2].count;
}

Eigen::Index InducingGrid::sum_counts() const {
  return static_cast<Eigen::Index>(axes_[0].count) + axes_[1].count + axes_[2].count;
}

Vec3 InducingGrid::node(Eigen::Index linear) const {
  const Eigen::Index m2 = axes_[1].count;
  const Eigen::Index m3 = axes_[2].count;
  const auto k = static_cast<int>(linear % m3);
  const auto j = static_cast<int>((linear / m3) % m2);
  const auto i = static_cast<int>(linear / (m2 * m3));
  return {axes_[0].node(i), axes_[1].node(j), axes_[2].node(k)};
}

Interval InducingGrid::interpolable(int d) const {
  const auto& a = axis(d);
  return {a.node(1), a.node(a.count - 2)};
}

std::array<Interval, 3> bounding_box(const Points& positions) {
  if (positions.rows() == 0) throw InvalidArgument("bounding_box: empty point set");
  std::array<Interval, 3> box;
  for (int d = 0; d < 3; ++d) {
    box[static_cast<std::size_t>(d)] = {positions.col(d).minCoeff(), positions.col(d).maxCoeff()};
  }
  return box;
}

InducingGrid build_grid(const std::array<Interval, 3>& data_bounds, const std::array<int, 3>& counts,
                        const std::array<int, 3>& padding) {
  std::array<GridAxis, 3> axes;
  for (std::size_t d = 0; d < 3; ++d) {
    const auto [lo, hi] = data_bounds[d];
    const std::string name = kAxisName[d];
    if (!(std::isfinite(lo) && std::isfinite(hi) && hi > lo)) {
      throw InvalidArgument("grid bounds in dimension " + name + " are degenerate: [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
    }
    if (counts[d] < 4) {
      throw InvalidArgument("grid count in dimension " + name + " must be >= 4, got " + std::to_string(counts[d]));
    }
    if (padding[d] < 0) throw InvalidArgument("grid padding in dimension " + name + " must be >= 0");
    const int cells = counts[d] - 1 - 2 * padding[d];
    if (cells < 1) {
      throw InvalidArgument("grid count " + std::to_string(counts[d]) + " in dimension " + name +
                            " leaves no cells inside the data bounds with padding " + std::to_string(padding[d]));
    }
    const double h = (hi - lo) / cells;
    axes[d] = {lo - padding[d] * h, h, counts[d]};
  }
  return InducingGrid(axes);
}

Eigen::MatrixXd KroneckerKernel::dense() const {
  const Eigen::Index m1 = factors[0].rows(), m2 = factors[1].rows(), m3 = factors[2].rows();
  const Eigen::Index n = m1 * m2 * m3;
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index r1 = r / (m2 * m3), r2 = (r / m3) % m2, r3 = r % m3;
    for (Eigen::Index c = 0; c < n; ++c) {
      const Eigen::Index c1 = c / (m2 * m3), c2 = (c / m3) % m2, c3 = c % m3;
      k(r, c) = factors[0](r1, c1) * factors[1](r2, c2) * factors[2](r3, c3);
    }
  }
  return k;
}

KroneckerKernel kron_kuu(const InducingGrid& grid, const Hyperparameters& hyp, double relative_jitter) {
  hyp.validate();
  KroneckerKernel k;
  const double jitter = relative_jitter * std::pow(hyp.signal_variance, 1.0 / 3.0);
  for (int d = 0; d < 3; ++d) {
    const auto& axis = grid.axis(d);
    Eigen::MatrixXd f(axis.count, axis.count);
    for (int j = 0; j < axis.count; ++j) {
      for (int i = j; i < axis.count; ++i) {
        f(i, j) = f(j, i) = factor_kernel_1d(axis.node(i), axis.node(j), 3, hyp);
      }
      f(j, j) += jitter;
    }
    k.factors[static_cast<std::size_t>(d)] = std::move(f);
  }
  return k;
}

CubicWeights cubic_weights_1d(double s, double spacing) {
  if (!(s >= 0.0 && s < 1.0)) throw InvalidArgument("cubic_weights_1d: offset must lie in [0, 1), got " + std::to_string(s));
  if (!(spacing > 0.0)) throw InvalidArgument("cubic_weights_1d: spacing must be > 0");
  return keys_weights(s, spacing);
}

Stencil locate(const InducingGrid& grid, const Vec3& p) {
  Stencil st;
  for (int d = 0; d < 3; ++d) {
    const auto& a = grid.axis(d);
    const double t = (p[d] - a.lower) / a.spacing;
    double cell = std::floor(t);
    double s = t - cell;
    if (cell == 0.0 && s > 1.0 - kEdgeSnap) {
      cell = 1.0;
      s = 0.0;
    } else if (cell == a.count - 2 && s < kEdgeSnap) {
      cell = a.count - 3;
      s = 1.0;
    }
    if (!std::isfinite(t) || cell < 1.0 || cell > a.count - 3) {
      const Interval ok = grid.interpolable(d);
      std::ostringstream msg;
      msg << "coordinate " << kAxisName[d] << " = " << p[d] << " lies outside the interpolable range [" << ok.lower
          << ", " << ok.upper << "]";
      throw DomainError(msg.str());
    }
    st.base[static_cast<std::size_t>(d)] = static_cast<int>(cell) - 1;
    st.weights[static_cast<std::size_t>(d)] = keys_weights(s, a.spacing);
  }
  return st;
}

namespace {

Stencil locate_row(const InducingGrid& grid, const Points& positions, Eigen::Index n) {
  try {
    return locate(grid, positions.row(n).transpose());
  } catch (const DomainError& e) {
    throw DomainError("position " + std::to_string(n) + ": " + e.what());
  }
}

template <typename Fn>
void for_each_stencil_entry(const InducingGrid& grid, const Stencil& st, Fn&& fn) {
  int k = 0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 4; ++c, ++k) {
        const auto col = grid.linear_index(st.base[0] + a, st.base[1] + b, st.base[2] + c);
        fn(k, static_cast<int>(col), a, b, c);
      }
    }
  }
}

}  // namespace

SparseInterpolation::SparseInterpolation(Eigen::Index rows, Eigen::Index cols)
    : rows_(rows),
      cols_(cols),
      indices_(static_cast<std::size_t>(rows * kStencilSize)),
      weights_(static_cast<std::size_t>(rows * kStencilSize)) {}

std::span<const int> SparseInterpolation::indices(Eigen::Index row) const {
  return {indices_.data() + row * kStencilSize, kStencilSize};
}

std::span<const double> SparseInterpolation::weights(Eigen::Index row) const {
  return {weights_.data() + row * kStencilSize, kStencilSize};
}

Eigen::VectorXd SparseInterpolation::apply(const Eigen::Ref<const Eigen::VectorXd>& grid_values) const {
  if (grid_values.size() != cols_) throw InvalidArgument("W apply: length mismatch");
  Eigen::VectorXd out(rows_);
  for (Eigen::Index r = 0; r < rows_; ++r) {
    const auto idx = indices(r);
    const auto w = weights(r);
    double acc = 0.0;
    for (int k = 0; k < kStencilSize; ++k) acc += w[k] * grid_values[idx[k]];
    out[r] = acc;
  }
  return out;
}

Eigen::VectorXd SparseInterpolation::apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != rows_) throw InvalidArgument("W apply_transpose: length mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols_);
  for (Eigen::Index r = 0; r < rows_; ++r) {
    const auto idx = indices(r);
    const auto w = weights(r);
    for (int k = 0; k < kStencilSize; ++k) out[idx[k]] += w[k] * v[r];
  }
  return out;
}

Eigen::MatrixXd SparseInterpolation::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows_, cols_);
  for (Eigen::Index r = 0; r < rows_; ++r) {
    const auto idx = indices(r);
    const auto w = weights(r);
    for (int k = 0; k < kStencilSize; ++k) m(r, idx[k]) += w[k];
  }
  return m;
}

SparseInterpolation build_W(const InducingGrid& grid, const Points& positions) {
  SparseInterpolation w(positions.rows(), grid.size());
  for (Eigen::Index n = 0; n < positions.rows(); ++n) {
    const Stencil st = locate_row(grid, positions, n);
    int* idx = w.indices_.data() + n * kStencilSize;
    double* val = w.weights_.data() + n * kStencilSize;
    for_each_stencil_entry(grid, st, [&](int k, int col, int a, int b, int c) {
      idx[k] = col;
      val[k] = st.weights[0].value[a] * st.weights[1].value[b] * st.weights[2].value[c];
    });
  }
  return w;
}

SparseDerivativeInterpolation::SparseDerivativeInterpolation(Eigen::Index measurements, Eigen::Index cols)
    : measurements_(measurements),
      cols_(cols),
      indices_(static_cast<std::size_t>(measurements * kStencilSize)),
      weights_(static_cast<std::size_t>(measurements * 3 * kStencilSize)),
      stencils_(static_cast<std::size_t>(measurements)) {}

std::span<const int> SparseDerivativeInterpolation::indices(Eigen::Index n) const {
  return {indices_.data() + n * kStencilSize, kStencilSize};
}

std::span<const double> SparseDerivativeInterpolation::weights(Eigen::Index n, int component) const {
  return {weights_.data() + (3 * n + component) * kStencilSize, kStencilSize};
}

void SparseDerivativeInterpolation::apply(const Eigen::Ref<const Eigen::VectorXd>& grid_values,
                                          Eigen::Ref<Eigen::VectorXd> out) const {
  if (grid_values.size() != cols_ || out.size() != rows()) throw InvalidArgument("dW apply: length mismatch");
  for (Eigen::Index n = 0; n < measurements_; ++n) {
    const int* idx = indices_.data() + n * kStencilSize;
    const double* wx = weights_.data() + 3 * n * kStencilSize;
    const double* wy = wx + kStencilSize;
    const double* wz = wy + kStencilSize;
    double gx = 0.0, gy = 0.0, gz = 0.0;
    for (int k = 0; k < kStencilSize; ++k) {
      const double g = grid_values[idx[k]];
      gx += wx[k] * g;
      gy += wy[k] * g;
      gz += wz[k] * g;
    }
    out[3 * n] = gx;
    out[3 * n + 1] = gy;
    out[3 * n + 2] = gz;
  }
}

void SparseDerivativeInterpolation::apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& v,
                                                    Eigen::Ref<Eigen::VectorXd> out) const {
  if (v.size() != rows() || out.size() != cols_) throw InvalidArgument("dW apply_transpose: length mismatch");
  out.setZero();
  for (Eigen::Index n = 0; n < measurements_; ++n) {
    const int* idx = indices_.data() + n * kStencilSize;
    const double* wx = weights_.data() + 3 * n * kStencilSize;
    const double* wy = wx + kStencilSize;
    const double* wz = wy + kStencilSize;
    const double vx = v[3 * n], vy = v[3 * n + 1], vz = v[3 * n + 2];
    for (int k = 0; k < kStencilSize; ++k) out[idx[k]] += wx[k] * vx + wy[k] * vy + wz[k] * vz;
  }
}

Eigen::VectorXd SparseDerivativeInterpolation::apply(const Eigen::Ref<const Eigen::VectorXd>& grid_values) const {
  Eigen::VectorXd out(rows());
  apply(grid_values, out);
  return out;
}

Eigen::VectorXd SparseDerivativeInterpolation::apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  Eigen::VectorXd out(cols_);
  apply_transpose(v, out);
  return out;
}

Eigen::MatrixXd SparseDerivativeInterpolation::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows(), cols_);
  for (Eigen::Index n = 0; n < measurements_; ++n) {
    const auto idx = indices(n);
    for (int c = 0; c < 3; ++c) {
      const auto w = weights(n, c);
      for (int k = 0; k < kStencilSize; ++k) m(3 * n + c, idx[k]) += w[k];
    }
  }
  return m;
}

SparseDerivativeInterpolation build_dW(const InducingGrid& grid, const Points& positions) {
  SparseDerivativeInterpolation dw(positions.rows(), grid.size());
  for (Eigen::Index n = 0; n < positions.rows(); ++n) {
    const Stencil st = locate_row(grid, positions, n);
    dw.stencils_[static_cast<std::size_t>(n)] = st;
    int* idx = dw.indices_.data() + n * kStencilSize;
    double* wx = dw.weights_.data() + 3 * n * kStencilSize;
    double* wy = wx + kStencilSize;
    double* wz = wy + kStencilSize;
    const auto& [x, y, z] = st.weights;
    for_each_stencil_entry(grid, st, [&](int k, int col, int a, int b, int c) {
      idx[k] = col;
      wx[k] = -x.derivative[a] * y.value[b] * z.value[c];
      wy[k] = -x.value[a] * y.derivative[b] * z.value[c];
      wz[k] = -x.value[a] * y.value[b] * z.derivative[c];
    });
  }
  return dw;
}

}  // namespace magmap
