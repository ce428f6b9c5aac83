#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "magmap/data.hpp"
#include "magmap/dski.hpp"
#include "magmap/exact_gp.hpp"

namespace magmap {

/// Synthetic accuracy study: per repetition one dataset is drawn, each area is
/// the inner square of it, split 80/20, and D-SKI, a budget-matched
/// downsampled GP and the full GP are scored by RMSE against the noise-free
/// field at the test positions.
struct EvalOptions {
  SimulationOptions simulation;               // box is overridden by full_half_width
  double full_half_width = 20.0;
  std::vector<double> area_half_widths{10.0, 20.0};
  std::vector<int> settings{10, 20, 40, 80, 100, 200};  // M^(1) = M^(2)
  int z_nodes = 5;
  double z_spacing = 0.1;
  int xy_padding = 1;
  int repetitions = 10;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  CgOptions cg;
  bool precondition = true;
  bool run_downsampled = true;
  bool run_full = true;
  DenseOptions dense;  // cap for the downsampled and the full GP
};

struct EvalCell {
  std::vector<double> dski;
  std::vector<double> downsampled;
  std::vector<int> cg_iterations;
  std::vector<Eigen::Index> n_dwn;
  std::vector<std::string> failures;
};

struct EvalArea {
  double half_width = 0.0;
  std::vector<Eigen::Index> n_train;
  std::vector<double> full;  // one per repetition, empty when skipped
  std::vector<std::string> failures;
  std::vector<EvalCell> cells;  // one per setting
};

struct EvalResult {
  std::vector<int> settings;
  int z_nodes = 5;
  std::vector<EvalArea> areas;
  SamplerKind sampler = SamplerKind::Exact;
};

/// Inducing grid used by the study for one area and setting.
InducingGrid eval_grid(const EvalOptions& options, double half_width, int setting);

EvalResult run_evaluation(const EvalOptions& options);

double mean_of(const std::vector<double>& v);
double stddev_of(const std::vector<double>& v);

/// Text table: one row per area and setting with mean +- std per method.
void write_eval_table(const EvalResult& result, std::ostream& out);

/// Fit-time scaling on a hallway-sized synthetic set.
struct BenchOptions {
  Eigen::Index n0 = 20000;
  std::vector<int> multiples{1, 2, 4};
  std::array<Interval, 3> box{Interval{-34.0, 34.0}, Interval{-5.25, 5.25}, Interval{0.2, 1.8}};
  std::array<int, 3> grid_counts{200, 40, 4};
  std::array<int, 3> padding{2, 2, 1};
  Hyperparameters hyp{0.5, 0.04, 1e-4};
  int spectral_features = 1024;
  FitOptions fit;
  int repeats = 1;
  std::uint64_t seed = 0;
};

struct BenchRow {
  Eigen::Index n = 0;
  double seconds = 0.0;        // best of repeats
  double ratio = 0.0;          // seconds / seconds of the previous row, 0 for the first
  int cg_iterations = 0;
  bool cg_converged = true;
  int lanczos_steps = 0;
};

/// Draws the largest set once and fits nested prefixes of it.
std::vector<BenchRow> run_scaling_bench(const BenchOptions& options);
void write_bench_table(const std::vector<BenchRow>& rows, std::ostream& out);

}  // namespace magmap
