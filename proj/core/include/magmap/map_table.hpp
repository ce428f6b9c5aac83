#pragma once

#include <array>
#include <string>

#include <Eigen/Core>

#include "magmap/types.hpp"

namespace magmap {

/// Evenly spaced nodes on [lower, upper]; a single node sits at `lower`.
struct LatticeAxis {
  double lower = 0.0;
  double upper = 0.0;
  int count = 1;

  double node(int k) const { return count == 1 ? lower : lower + k * (upper - lower) / (count - 1); }
};

/// Regular query lattice. Node order is x fastest, then y, then z.
struct Lattice {
  std::array<LatticeAxis, 3> axes{};

  Eigen::Index size() const;
  Vec3 node(Eigen::Index index) const;
  void validate() const;
};

/// Per-node predictions of a lattice query.
struct MapTable {
  std::array<int, 3> shape{0, 0, 0};  // nodes along x, y, z
  Points positions;
  Points mean;
  Points variance;  // diagonal of each predictive covariance block
  Eigen::VectorXd magnitude;
  Eigen::Index clamped = 0;  // nodes whose variance diagonal was clamped at 0

  Eigen::Index size() const { return positions.rows(); }
  void validate() const;
};

/// Text format: one header line, then
/// x,y,z,mean_x,mean_y,mean_z,var_x,var_y,var_z,magnitude per node.
void save_map(const MapTable& table, const std::string& path);
/// Reads save_map output; the lattice shape is recovered from the distinct coordinates.
MapTable load_map(const std::string& path);

}  // namespace magmap
