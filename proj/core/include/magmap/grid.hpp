#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "magmap/types.hpp"

namespace magmap {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// One equispaced axis of the inducing grid: nodes lower + k * spacing.
struct GridAxis {
  double lower = 0.0;
  double spacing = 1.0;
  int count = 0;

  double node(int k) const { return lower + k * spacing; }
  double upper() const { return node(count - 1); }
  bool operator==(const GridAxis&) const = default;
};

/// Cartesian grid of inducing inputs. Node (i, j, k) has linear index
/// (i * M2 + j) * M3 + k, which matches the ordering of K1 (x) K2 (x) K3.
class InducingGrid {
 public:
  InducingGrid() = default;
  explicit InducingGrid(const std::array<GridAxis, 3>& axes);

  const GridAxis& axis(int d) const { return axes_[static_cast<std::size_t>(d)]; }
  const std::array<GridAxis, 3>& axes() const { return axes_; }
  std::array<int, 3> counts() const { return {axes_[0].count, axes_[1].count, axes_[2].count}; }

  /// Total number of inducing points M_ind.
  Eigen::Index size() const;
  /// M^(1) + M^(2) + M^(3), the per-node cost factor of a Kronecker MVM.
  Eigen::Index sum_counts() const;

  Eigen::Index linear_index(int i, int j, int k) const {
    return (static_cast<Eigen::Index>(i) * axes_[1].count + j) * axes_[2].count + k;
  }
  Vec3 node(Eigen::Index linear) const;

  /// Closed interval of coordinates in dimension d that have a full 4-point stencil.
  Interval interpolable(int d) const;

  bool operator==(const InducingGrid&) const = default;

 private:
  std::array<GridAxis, 3> axes_{};
};

/// Axis-aligned bounding box of a point set.
std::array<Interval, 3> bounding_box(const Points& positions);

/// Equispaced grid whose outermost `padding[d]` cells lie beyond the data
/// bounds on each side, so every point inside the bounds is interpolable when
/// padding >= 1. Requires counts >= 4 and counts - 1 > 2 * padding.
InducingGrid build_grid(const std::array<Interval, 3>& data_bounds, const std::array<int, 3>& counts,
                        const std::array<int, 3>& padding = {2, 2, 2});

/// K_uu held as its three per-dimension factors.
struct KroneckerKernel {
  std::array<Eigen::MatrixXd, 3> factors;

  Eigen::Index size() const { return factors[0].rows() * factors[1].rows() * factors[2].rows(); }
  /// Explicit Kronecker product. Only sensible for small grids.
  Eigen::MatrixXd dense() const;
};

/// Per-dimension SE factors with signal variance sigma_f^(2/3); the diagonal of
/// each factor gets relative_jitter * sigma_f^(2/3).
KroneckerKernel kron_kuu(const InducingGrid& grid, const Hyperparameters& hyp,
                         double relative_jitter = kDefaultRelativeJitter);

/// Keys cubic-convolution weights (a = -1/2) for stencil offsets {-1, 0, 1, 2}
/// at fractional offset s, and their derivatives with respect to the spatial
/// coordinate (d/ds divided by `spacing`).
struct CubicWeights {
  std::array<double, 4> value{};
  std::array<double, 4> derivative{};
};
CubicWeights cubic_weights_1d(double s, double spacing = 1.0);

/// Location of a point on the grid: first stencil node per dimension and the
/// 1-D weights there.
struct Stencil {
  std::array<int, 3> base{};
  std::array<CubicWeights, 3> weights{};
};

/// Throws DomainError if p has no full stencil in some dimension.
Stencil locate(const InducingGrid& grid, const Vec3& p);

inline constexpr int kStencilSize = 64;

/// Row-sparse interpolation matrix W (N x M_ind), 64 entries per row.
class SparseInterpolation {
 public:
  SparseInterpolation(Eigen::Index rows, Eigen::Index cols);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  std::span<const int> indices(Eigen::Index row) const;
  std::span<const double> weights(Eigen::Index row) const;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& grid_values) const;
  Eigen::VectorXd apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::MatrixXd dense() const;

 private:
  friend SparseInterpolation build_W(const InducingGrid&, const Points&);
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<int> indices_;
  std::vector<double> weights_;
};

/// Derivative interpolation matrix dW (3N x M_ind). Rows are measurement-major,
/// component-minor, matching vec(Y^T). The rows hold the NEGATED gradient of
/// the interpolation weights, so dW * phi_grid = -grad(phi) and the model
/// output y = -grad(phi) needs no extra sign anywhere downstream.
class SparseDerivativeInterpolation {
 public:
  SparseDerivativeInterpolation(Eigen::Index measurements, Eigen::Index cols);

  Eigen::Index measurements() const { return measurements_; }
  Eigen::Index rows() const { return 3 * measurements_; }
  Eigen::Index cols() const { return cols_; }

  /// The 64 grid columns touched by measurement n.
  std::span<const int> indices(Eigen::Index n) const;
  /// Weights of row 3n + component over indices(n).
  std::span<const double> weights(Eigen::Index n, int component) const;
  const Stencil& stencil(Eigen::Index n) const { return stencils_[static_cast<std::size_t>(n)]; }

  /// out = dW * grid_values (length 3N).
  void apply(const Eigen::Ref<const Eigen::VectorXd>& grid_values, Eigen::Ref<Eigen::VectorXd> out) const;
  /// out = dW^T * v (length M_ind).
  void apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& v, Eigen::Ref<Eigen::VectorXd> out) const;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& grid_values) const;
  Eigen::VectorXd apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  Eigen::MatrixXd dense() const;

 private:
  friend SparseDerivativeInterpolation build_dW(const InducingGrid&, const Points&);
  Eigen::Index measurements_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<int> indices_;     // 64 per measurement
  std::vector<double> weights_;  // 3 x 64 per measurement
  std::vector<Stencil> stencils_;
};

SparseInterpolation build_W(const InducingGrid& grid, const Points& positions);
SparseDerivativeInterpolation build_dW(const InducingGrid& grid, const Points& positions);

}  // namespace magmap
