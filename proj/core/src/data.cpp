#include "magmap/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>

#include "magmap/kernels.hpp"

namespace magmap {

namespace {

Points standard_normal(Eigen::Index rows, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Points z(rows, 3);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  return z;
}

}  // namespace

PriorSample draw_curlfree_prior(const Points& positions, const Hyperparameters& hyp, std::uint64_t seed,
                                const DenseOptions& options) {
  hyp.validate();
  const Eigen::Index dim = 3 * positions.rows();
  if (dim > options.max_dimension) {
    throw CapacityError("sample_curlfree_prior: dimension " + std::to_string(dim) + " exceeds the dense cap of " +
                        std::to_string(options.max_dimension));
  }
  std::mt19937_64 rng(seed);
  PriorSample out;
  out.latent = Points::Zero(positions.rows(), 3);
  Eigen::MatrixXd k = curlfree_gram(positions, hyp);
  k.diagonal().array() += options.relative_jitter * hyp.signal_variance;
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(k);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("sample_curlfree_prior: prior covariance is not numerically positive definite; "
                             "increase the jitter");
  }
  const Points z = standard_normal(positions.rows(), rng);
  stacked(out.latent) = llt.matrixL() * stacked(z);
  out.observed = out.latent + std::sqrt(hyp.noise_variance) * standard_normal(positions.rows(), rng);
  return out;
}

Points sample_curlfree_prior(const Points& positions, const Hyperparameters& hyp, std::uint64_t seed,
                             const DenseOptions& options) {
  return draw_curlfree_prior(positions, hyp, seed, options).observed;
}

PriorSample draw_spectral_prior(const Points& positions, const Hyperparameters& hyp, std::uint64_t seed,
                                int features) {
  hyp.validate();
  if (features < 1) throw InvalidArgument("draw_spectral_prior: need at least one feature");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::Matrix3Xd omega(3, features);
  Eigen::VectorXd a(features), b(features);
  for (int f = 0; f < features; ++f) {
    for (int d = 0; d < 3; ++d) omega(d, f) = normal(rng) / hyp.length_scale;
    a[f] = normal(rng);
    b[f] = normal(rng);
  }
  const double amplitude = std::sqrt(hyp.signal_variance / features);

  PriorSample out;
  out.latent.resize(positions.rows(), 3);
  // -grad of sum_f a_f cos(w_f . p) + b_f sin(w_f . p)
  for (Eigen::Index n = 0; n < positions.rows(); ++n) {
    const Eigen::VectorXd phase = omega.transpose() * positions.row(n).transpose();
    const Eigen::VectorXd coeff = (a.array() * phase.array().sin() - b.array() * phase.array().cos()).matrix();
    out.latent.row(n) = amplitude * (omega * coeff).transpose();
  }
  out.observed = out.latent + std::sqrt(hyp.noise_variance) * standard_normal(positions.rows(), rng);
  return out;
}

const char* to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Auto:
      return "auto";
    case SamplerKind::Exact:
      return "exact";
    case SamplerKind::Spectral:
      return "spectral";
  }
  return "unknown";
}

SimulationDataset make_simulation_dataset(const SimulationOptions& options) {
  const char* axis_name[2] = {"x", "y"};
  for (int d = 0; d < 2; ++d) {
    const auto& iv = options.box[static_cast<std::size_t>(d)];
    if (!(std::isfinite(iv.lower) && std::isfinite(iv.upper) && iv.lower < iv.upper)) {
      throw InvalidArgument(std::string("simulation box: ") + axis_name[d] + "_min must be < " + axis_name[d] + "_max");
    }
  }
  if (options.n_points < 0) throw InvalidArgument("simulation: n_points must be >= 0");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> ux(options.box[0].lower, options.box[0].upper);
  std::uniform_real_distribution<double> uy(options.box[1].lower, options.box[1].upper);
  Points positions(options.n_points, 3);
  for (Eigen::Index n = 0; n < options.n_points; ++n) {
    const double x = ux(rng);
    const double y = uy(rng);
    positions.row(n) << x, y, options.z_level;
  }

  SamplerKind kind = options.sampler;
  if (kind == SamplerKind::Auto) {
    kind = 3 * options.n_points <= options.dense.max_dimension ? SamplerKind::Exact : SamplerKind::Spectral;
  }
  const std::uint64_t field_seed = rng();
  PriorSample sample = kind == SamplerKind::Exact
                           ? draw_curlfree_prior(positions, options.hyp, field_seed, options.dense)
                           : draw_spectral_prior(positions, options.hyp, field_seed, options.spectral_features);
  SimulationDataset out;
  out.data.positions = std::move(positions);
  out.data.measurements = std::move(sample.observed);
  out.latent = std::move(sample.latent);
  out.sampler = kind;
  return out;
}

std::vector<Eigen::Index> rows_in_square(const Points& positions, double half_width) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index n = 0; n < positions.rows(); ++n) {
    if (std::abs(positions(n, 0)) <= half_width && std::abs(positions(n, 1)) <= half_width) rows.push_back(n);
  }
  return rows;
}

Split split_indices(Eigen::Index n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("split: train fraction must lie in (0, 1)");
  }
  if (n <= 0) throw InvalidArgument("split: empty input");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  Split split;
  split.train.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  return split;
}

std::pair<TrainingSet, TrainingSet> split_train_test(const TrainingSet& data, double train_fraction,
                                                     std::uint64_t seed) {
  const Split split = split_indices(data.size(), train_fraction, seed);
  return {select_rows(data, split.train), select_rows(data, split.test)};
}

double rmse(const Points& predicted, const Points& truth) {
  if (predicted.rows() != truth.rows()) {
    throw InvalidArgument("rmse: " + std::to_string(predicted.rows()) + " predictions vs " +
                          std::to_string(truth.rows()) + " truth rows");
  }
  if (predicted.rows() == 0) throw InvalidArgument("rmse: empty input");
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(predicted.size()));
}

BudgetReport budget_match(Eigen::Index n, const InducingGrid& grid, int cg_iterations) {
  if (cg_iterations < 1) throw InvalidArgument("budget_match: J must be >= 1");
  if (n < 1) throw InvalidArgument("budget_match: N must be >= 1");
  BudgetReport r;
  r.operations = static_cast<double>(cg_iterations) *
                 (3.0 * static_cast<double>(n) + static_cast<double>(grid.size()) * static_cast<double>(grid.sum_counts()));
  r.n_dwn = static_cast<Eigen::Index>(std::llround(std::cbrt(r.operations)));
  r.m_bf = static_cast<Eigen::Index>(std::llround(std::sqrt(r.operations / (3.0 * static_cast<double>(n)))));
  return r;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

TrainingSet load_measurements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open measurement file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header line");
  std::vector<std::array<double, 6>> rows;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    std::array<double, 6> values{};
    std::size_t field = 0;
    std::size_t pos = 0;
    while (pos <= view.size()) {
      const auto comma = view.find(',', pos);
      const std::string_view token = trim(view.substr(pos, comma == std::string_view::npos ? view.npos : comma - pos));
      if (field >= 6) throw ParseError(path + ":" + std::to_string(line_no) + ": expected 6 columns");
      const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), values[field]);
      if (ec != std::errc() || end != token.data() + token.size() || token.empty()) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": cannot parse '" + std::string(token) + "'");
      }
      if (!std::isfinite(values[field])) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": non-finite value in column " +
                         std::to_string(field + 1));
      }
      ++field;
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (field != 6) throw ParseError(path + ":" + std::to_string(line_no) + ": expected 6 columns");
    rows.push_back(values);
  }
  Points positions(static_cast<Eigen::Index>(rows.size()), 3);
  Points raw(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    positions.row(r) << rows[i][0], rows[i][1], rows[i][2];
    raw.row(r) << rows[i][3], rows[i][4], rows[i][5];
  }
  return make_training_set(std::move(positions), std::move(raw));
}

void save_measurements(const TrainingSet& data, const std::string& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "x,y,z,Bx,By,Bz\n";
  out.precision(17);
  for (Eigen::Index n = 0; n < data.size(); ++n) {
    const Vec3 raw = data.measurements.row(n).transpose() + data.component_means;
    out << data.positions(n, 0) << ',' << data.positions(n, 1) << ',' << data.positions(n, 2) << ',' << raw[0] << ','
        << raw[1] << ',' << raw[2] << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace magmap
