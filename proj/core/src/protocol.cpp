#include "magmap/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace magmap {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  // splitmix64 over the combined key
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Points predict_means(const FittedMap& map, const Points& query) {
  Points out(query.rows(), 3);
  for (Eigen::Index n = 0; n < query.rows(); ++n) out.row(n) = map.predict_mean(query.row(n).transpose()).transpose();
  return out;
}

Points prediction_means(const Prediction& p) {
  return p.mean;
}

}  // namespace

InducingGrid eval_grid(const EvalOptions& options, double half_width, int setting) {
  const double z = options.simulation.z_level;
  const double hz = options.z_spacing;
  const int zpad = 1;
  const double z_half = hz * (options.z_nodes - 1 - 2 * zpad) / 2.0;
  const std::array<Interval, 3> bounds{Interval{-half_width, half_width}, Interval{-half_width, half_width},
                                       Interval{z - z_half, z + z_half}};
  return build_grid(bounds, {setting, setting, options.z_nodes}, {options.xy_padding, options.xy_padding, zpad});
}

EvalResult run_evaluation(const EvalOptions& options) {
  if (options.repetitions < 1) throw InvalidArgument("eval: repetitions must be >= 1");
  if (options.settings.empty() || options.area_half_widths.empty()) {
    throw InvalidArgument("eval: need at least one area and one setting");
  }
  for (double w : options.area_half_widths) {
    if (!(w > 0.0 && w <= options.full_half_width)) {
      throw InvalidArgument("eval: area half widths must lie in (0, full_half_width]");
    }
  }
  // Validate every grid before any compute.
  for (double w : options.area_half_widths) {
    for (int s : options.settings) (void)eval_grid(options, w, s);
  }

  EvalResult result;
  result.settings = options.settings;
  result.z_nodes = options.z_nodes;
  for (double w : options.area_half_widths) {
    EvalArea area;
    area.half_width = w;
    area.cells.resize(options.settings.size());
    result.areas.push_back(std::move(area));
  }

  SimulationOptions sim = options.simulation;
  sim.box = {Interval{-options.full_half_width, options.full_half_width},
             Interval{-options.full_half_width, options.full_half_width}};

  for (int rep = 0; rep < options.repetitions; ++rep) {
    sim.seed = mix_seed(options.seed, static_cast<std::uint64_t>(rep));
    const SimulationDataset data = make_simulation_dataset(sim);
    result.sampler = data.sampler;

    for (std::size_t a = 0; a < result.areas.size(); ++a) {
      EvalArea& area = result.areas[a];
      const auto rows = rows_in_square(data.data.positions, area.half_width);
      const TrainingSet subset = select_rows(data.data, rows);
      const Points truth_all = select_rows(data.latent, rows);
      const Split split = split_indices(subset.size(), options.train_fraction, mix_seed(sim.seed, a, 1));
      const TrainingSet train = select_rows(subset, split.train);
      const Points test = select_rows(subset.positions, split.test);
      const Points truth = select_rows(truth_all, split.test);
      area.n_train.push_back(train.size());

      if (options.run_full) {
        if (3 * train.size() <= options.dense.max_dimension) {
          try {
            const ExactModel full = fit_exact(train, options.simulation.hyp, options.dense);
            area.full.push_back(rmse(prediction_means(predict_exact(full, test)), truth));
          } catch (const Error& e) {
            area.failures.push_back("rep " + std::to_string(rep) + " full GP: " + e.what());
          }
        }
      }

      for (std::size_t s = 0; s < options.settings.size(); ++s) {
        EvalCell& cell = area.cells[s];
        const InducingGrid grid = eval_grid(options, area.half_width, options.settings[s]);
        int iterations = 0;
        try {
          FitOptions fit;
          fit.cg = options.cg;
          fit.precondition = options.precondition;
          fit.lanczos_steps = 0;
          const FittedMap map = fit_dski(train, grid, options.simulation.hyp, fit);
          iterations = std::max(1, map.diagnostics().cg_iterations);
          if (!map.diagnostics().cg_converged) {
            cell.failures.push_back("rep " + std::to_string(rep) + " D-SKI: CG did not converge");
          }
          cell.dski.push_back(rmse(predict_means(map, test), truth));
          cell.cg_iterations.push_back(iterations);
        } catch (const Error& e) {
          cell.failures.push_back("rep " + std::to_string(rep) + " D-SKI: " + e.what());
          continue;
        }
        if (!options.run_downsampled) continue;
        try {
          const BudgetReport budget = budget_match(train.size(), grid, iterations);
          Eigen::Index n_dwn = std::min(budget.n_dwn, train.size());
          n_dwn = std::min(n_dwn, options.dense.max_dimension / 3);
          n_dwn = std::max<Eigen::Index>(n_dwn, 1);
          const TrainingSet small = downsample_baseline(train, n_dwn, mix_seed(sim.seed, a, 2 + s));
          const ExactModel gp = fit_exact(small, options.simulation.hyp, options.dense);
          cell.downsampled.push_back(rmse(prediction_means(predict_exact(gp, test)), truth));
          cell.n_dwn.push_back(n_dwn);
        } catch (const Error& e) {
          cell.failures.push_back("rep " + std::to_string(rep) + " downsampled GP: " + e.what());
        }
      }
    }
  }
  return result;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

std::string mean_std(const std::vector<double>& v) {
  if (v.empty()) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f +- %.5f", mean_of(v), stddev_of(v));
  return buf;
}

template <typename T>
std::string range_of(const std::vector<T>& v) {
  if (v.empty()) return "-";
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi ? std::to_string(*lo) : std::to_string(*lo) + "-" + std::to_string(*hi);
}

}  // namespace

void write_eval_table(const EvalResult& result, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %-8s %-8s %-22s %-22s %-22s %-10s %-10s\n", "area", "setting", "M_ind",
                "dski", "downsampled", "full", "J", "N_dwn");
  out << line;
  for (const EvalArea& area : result.areas) {
    for (std::size_t s = 0; s < result.settings.size(); ++s) {
      const EvalCell& cell = area.cells[s];
      const long m = static_cast<long>(result.settings[s]) * result.settings[s] * result.z_nodes;
      std::snprintf(line, sizeof line, "%-6g %-8zu %-8ld %-22s %-22s %-22s %-10s %-10s\n", 2 * area.half_width, s + 1,
                    m, mean_std(cell.dski).c_str(), mean_std(cell.downsampled).c_str(), mean_std(area.full).c_str(),
                    range_of(cell.cg_iterations).c_str(), range_of(cell.n_dwn).c_str());
      out << line;
    }
  }
  for (const EvalArea& area : result.areas) {
    for (const auto& f : area.failures) out << "# area " << 2 * area.half_width << ": " << f << '\n';
    for (std::size_t s = 0; s < area.cells.size(); ++s) {
      for (const auto& f : area.cells[s].failures) {
        out << "# area " << 2 * area.half_width << " setting " << s + 1 << ": " << f << '\n';
      }
    }
  }
}

std::vector<BenchRow> run_scaling_bench(const BenchOptions& options) {
  if (options.n0 < 1 || options.multiples.empty()) throw InvalidArgument("bench: need N0 >= 1 and a multiple");
  if (options.repeats < 1) throw InvalidArgument("bench: repeats must be >= 1");
  for (int m : options.multiples) {
    if (m < 1) throw InvalidArgument("bench: multiples must be >= 1");
  }
  const InducingGrid grid = build_grid(options.box, options.grid_counts, options.padding);
  const int max_multiple = *std::max_element(options.multiples.begin(), options.multiples.end());
  const Eigen::Index n_max = options.n0 * max_multiple;

  std::mt19937_64 rng(options.seed);
  Points positions(n_max, 3);
  for (int d = 0; d < 3; ++d) {
    std::uniform_real_distribution<double> u(options.box[static_cast<std::size_t>(d)].lower,
                                             options.box[static_cast<std::size_t>(d)].upper);
    for (Eigen::Index n = 0; n < n_max; ++n) positions(n, d) = u(rng);
  }
  const PriorSample sample = draw_spectral_prior(positions, options.hyp, rng(), options.spectral_features);

  std::vector<BenchRow> rows;
  for (int m : options.multiples) {
    const Eigen::Index n = options.n0 * m;
    const TrainingSet train = make_training_set(positions.topRows(n), sample.observed.topRows(n));
    BenchRow row;
    row.n = n;
    row.seconds = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.repeats; ++r) {
      const auto start = Clock::now();
      const FittedMap map = fit_dski(train, grid, options.hyp, options.fit);
      const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
      row.seconds = std::min(row.seconds, seconds);
      row.cg_iterations = map.diagnostics().cg_iterations;
      row.cg_converged = map.diagnostics().cg_converged;
      row.lanczos_steps = map.diagnostics().lanczos_steps;
    }
    if (!rows.empty()) row.ratio = row.seconds / rows.back().seconds;
    rows.push_back(row);
  }
  return rows;
}

void write_bench_table(const std::vector<BenchRow>& rows, std::ostream& out) {
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %-12s %-8s %-6s %-10s %-6s\n", "N", "fit_s", "ratio", "J", "converged", "T");
  out << line;
  for (const BenchRow& r : rows) {
    std::snprintf(line, sizeof line, "%-10ld %-12.3f %-8.3f %-6d %-10s %-6d\n", static_cast<long>(r.n), r.seconds,
                  r.ratio, r.cg_iterations, r.cg_converged ? "yes" : "no", r.lanczos_steps);
    out << line;
  }
}

}  // namespace magmap
