#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "magmap/exact_gp.hpp"
#include "magmap/grid.hpp"
#include "magmap/types.hpp"

namespace magmap {

/// A draw of the curl-free prior: the noise-free field and the noisy measurements.
struct PriorSample {
  Points latent;
  Points observed;
};

/// Exact draw of vec(Y^T) ~ N(0, d2(K_ff) + sigma_y^2 I) through a dense
/// Cholesky factor. Deterministic in `seed`.
PriorSample draw_curlfree_prior(const Points& positions, const Hyperparameters& hyp, std::uint64_t seed,
                                const DenseOptions& options = {});

/// The observed part of draw_curlfree_prior.
Points sample_curlfree_prior(const Points& positions, const Hyperparameters& hyp, std::uint64_t seed,
                             const DenseOptions& options = {});

/// Draw from the same prior through `features` random Fourier features of the
/// squared-exponential potential. Given the sampled frequencies the field is
/// exactly Gaussian and curl-free; its covariance matches the SE curl-free
/// kernel up to O(1/sqrt(features)). Linear in the number of points.
PriorSample draw_spectral_prior(const Points& positions, const Hyperparameters& hyp, std::uint64_t seed,
                                int features = 8192);

enum class SamplerKind {
  Auto,      // Exact when 3N fits the dense cap, Spectral otherwise
  Exact,
  Spectral,
};

const char* to_string(SamplerKind kind);

struct SimulationOptions {
  std::array<Interval, 2> box{Interval{-20.0, 20.0}, Interval{-20.0, 20.0}};  // x and y ranges
  double z_level = 0.01;
  Eigen::Index n_points = 6000;
  Hyperparameters hyp{2.0, 1.0, 0.01};
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::Auto;
  int spectral_features = 8192;
  DenseOptions dense;
};

/// Synthetic set with its noise-free truth. Measurements are not centred.
struct SimulationDataset {
  TrainingSet data;
  Points latent;
  SamplerKind sampler = SamplerKind::Exact;
};

/// Uniform positions on the plane z = z_level inside the box, outputs drawn
/// from the curl-free prior.
SimulationDataset make_simulation_dataset(const SimulationOptions& options);

/// Rows whose x and y lie inside [-half_width, half_width].
std::vector<Eigen::Index> rows_in_square(const Points& positions, double half_width);

struct Split {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

/// Seeded shuffle split; round(fraction * n) rows go to training.
Split split_indices(Eigen::Index n, double train_fraction, std::uint64_t seed);
std::pair<TrainingSet, TrainingSet> split_train_test(const TrainingSet& data, double train_fraction,
                                                     std::uint64_t seed);

/// Root mean square error over all 3N scalar components.
double rmse(const Points& predicted, const Points& truth);

struct BudgetReport {
  double operations = 0.0;   // O_ind = J (3N + M_ind sum_d M^(d))
  Eigen::Index n_dwn = 0;    // round(O_ind^(1/3))
  Eigen::Index m_bf = 0;     // round(sqrt(O_ind / 3N))
};

/// Matches the D-SKI operation count to a downsampled full GP and to a
/// basis-function GP.
BudgetReport budget_match(Eigen::Index n, const InducingGrid& grid, int cg_iterations);

/// Reads "x,y,z,Bx,By,Bz" CSV with one header line. Per-component means are
/// subtracted and recorded in component_means.
TrainingSet load_measurements(const std::string& path);

/// Writes the raw measurements (component_means added back) in the format
/// load_measurements reads.
void save_measurements(const TrainingSet& data, const std::string& path);

}  // namespace magmap
