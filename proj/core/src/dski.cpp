#include "magmap/dski.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <type_traits>

namespace magmap {

DskiSystem::DskiSystem(const TrainingSet& train, const InducingGrid& grid, const Hyperparameters& hyp,
                       double relative_jitter)
    : dw_(build_dW(grid, train.positions)),
      kuu_(kron_kuu(grid, hyp, relative_jitter)),
      a_(dw_, kuu_, hyp.noise_variance) {}

CgResult DskiSystem::solve(const Eigen::VectorXd& rhs, const CgOptions& cg, bool precondition) const {
  if (precondition && a_.size() > 0) return pcg(a_.as_operator(), rhs, cg, jacobi_preconditioner(a_.diagonal()));
  return pcg(a_.as_operator(), rhs, cg);
}

FittedMap fit_dski(const TrainingSet& train, const InducingGrid& grid, const Hyperparameters& hyp,
                   const FitOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  hyp.validate();
  train.validate();
  if (options.lanczos_steps < 0) throw InvalidArgument("fit_dski: lanczos_steps must be >= 0");

  const DskiSystem system(train, grid, hyp, options.relative_jitter);
  const auto& dw = system.interpolation();
  const Eigen::VectorXd y = stacked(train.measurements);

  FittedMap map;
  map.grid_ = grid;
  map.hyp_ = hyp;
  map.jitter_ = options.relative_jitter;
  map.offset_ = train.component_means;
  map.diag_.measurements = train.size();

  const CgResult cg = system.solve(y, options.cg, options.precondition);
  map.diag_.cg_iterations = cg.iterations;
  map.diag_.cg_residual = cg.relative_residual;
  map.diag_.cg_converged = cg.converged;
  map.mean_cache_ = kron_mvm(system.kernel(), dw.apply_transpose(cg.solution));

  map.has_variance_ = options.lanczos_steps > 0;
  map.love_.resize(grid.size(), 0);
  if (map.has_variance_ && dw.rows() > 0) {
    const int steps = static_cast<int>(std::min<Eigen::Index>(options.lanczos_steps, dw.rows()));
    Eigen::VectorXd start = y;
    if (options.lanczos_start == LanczosStart::Random || y.norm() == 0.0) {
      std::mt19937_64 rng(options.seed);
      std::normal_distribution<double> normal;
      for (auto& v : start) v = normal(rng);
    }
    const LanczosFactors lf = lanczos(system.op().as_operator(), start, steps);
    map.diag_.lanczos_steps = lf.steps();
    map.diag_.lanczos_breakdown = lf.breakdown;
    map.tridiagonal_ = lf.tridiagonal;
    map.love_.resize(grid.size(), lf.steps());
    for (int t = 0; t < lf.steps(); ++t) {
      map.love_.col(t) = kron_mvm(system.kernel(), dw.apply_transpose(lf.basis.col(t)));
    }
  }
  map.finalize();
  map.diag_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return map;
}

bool clamp_diagonal(Mat3& covariance) {
  bool clamped = false;
  for (int c = 0; c < 3; ++c) {
    if (covariance(c, c) < 0.0) {
      covariance(c, c) = 0.0;
      clamped = true;
    }
  }
  return clamped;
}

void FittedMap::finalize() {
  kuu_ = kron_kuu(grid_, hyp_, jitter_);
  ldlt_ = TridiagonalLdlt(tridiagonal_);
}

Vec3 FittedMap::predict_mean(const Vec3& p) const {
  Points q(1, 3);
  q.row(0) = p.transpose();
  const auto dw = build_dW(grid_, q);
  return dw.apply(mean_cache_) + offset_;
}

Mat3 FittedMap::prior_variance(const Vec3& p) const {
  const Stencil st = locate(grid_, p);
  return stencil_gram(kuu_, st, st);
}

VarianceEstimate FittedMap::predict_variance(const Vec3& p) const {
  if (!has_variance_) throw InvalidArgument("predict_variance: map was fitted without variance factors");
  Points q(1, 3);
  q.row(0) = p.transpose();
  const auto dw = build_dW(grid_, q);
  VarianceEstimate est;
  est.covariance = stencil_gram(kuu_, dw.stencil(0), dw.stencil(0));
  const Eigen::Index t = love_.cols();
  if (t > 0) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(t, 3);  // (dw R)^T
    const auto idx = dw.indices(0);
    for (int c = 0; c < 3; ++c) {
      const auto w = dw.weights(0, c);
      for (int k = 0; k < kStencilSize; ++k) g.col(c) += w[k] * love_.row(idx[k]).transpose();
    }
    est.covariance -= g.transpose() * ldlt_.solve(g);
  }
  est.clamped = clamp_diagonal(est.covariance);
  return est;
}

MapTable FittedMap::predict_grid(const Lattice& lattice) const {
  lattice.validate();
  if (!has_variance_) throw InvalidArgument("predict_grid: map was fitted without variance factors");
  const Eigen::Index n = lattice.size();
  MapTable table;
  table.shape = {lattice.axes[0].count, lattice.axes[1].count, lattice.axes[2].count};
  table.positions.resize(n, 3);
  table.mean.resize(n, 3);
  table.variance.resize(n, 3);
  table.magnitude.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = lattice.node(i);
    table.positions.row(i) = p.transpose();
    try {
      const Vec3 m = predict_mean(p);
      const VarianceEstimate v = predict_variance(p);
      table.mean.row(i) = m.transpose();
      table.variance.row(i) = v.covariance.diagonal().transpose();
      table.magnitude[i] = m.norm();
      if (v.clamped) ++table.clamped;
    } catch (const DomainError& e) {
      std::ostringstream msg;
      msg << "lattice node " << i << " (" << p.x() << ", " << p.y() << ", " << p.z() << "): " << e.what();
      throw DomainError(msg.str());
    }
  }
  return table;
}

namespace {

constexpr char kMagic[8] = {'M', 'A', 'G', 'M', 'A', 'P', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), sizeof(T))) throw ParseError("map file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < n; ++i) write_le(out, data[i]);
  }
}

void read_doubles(std::istream& in, double* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)))) {
      throw ParseError("map file is truncated");
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = read_le<double>(in);
  }
}

}  // namespace

void FittedMap::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  write_le(out, kFormatVersion);
  for (const auto& a : grid_.axes()) {
    write_le(out, a.lower);
    write_le(out, a.spacing);
    write_le(out, static_cast<std::int32_t>(a.count));
  }
  write_le(out, hyp_.length_scale);
  write_le(out, hyp_.signal_variance);
  write_le(out, hyp_.noise_variance);
  write_le(out, jitter_);
  for (int c = 0; c < 3; ++c) write_le(out, offset_[c]);

  write_le(out, static_cast<std::uint64_t>(diag_.measurements));
  write_le(out, static_cast<std::int32_t>(diag_.cg_iterations));
  write_le(out, diag_.cg_residual);
  write_le(out, static_cast<std::uint8_t>(diag_.cg_converged));
  write_le(out, static_cast<std::int32_t>(diag_.lanczos_steps));
  write_le(out, static_cast<std::uint8_t>(diag_.lanczos_breakdown));

  write_le(out, static_cast<std::uint64_t>(mean_cache_.size()));
  write_doubles(out, mean_cache_.data(), static_cast<std::size_t>(mean_cache_.size()));

  write_le(out, static_cast<std::uint8_t>(has_variance_));
  const auto t = static_cast<std::uint64_t>(tridiagonal_.size());
  write_le(out, t);
  write_doubles(out, tridiagonal_.diagonal.data(), t);
  write_doubles(out, tridiagonal_.off_diagonal.data(), t > 0 ? t - 1 : 0);
  write_doubles(out, love_.data(), static_cast<std::size_t>(love_.size()));
  if (!out) throw Error("failed to write map");
}

void FittedMap::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save(out);
}

FittedMap FittedMap::load(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a magmap file (bad magic header)");
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kFormatVersion) throw ParseError("unsupported map format version " + std::to_string(version));

  FittedMap map;
  std::array<GridAxis, 3> axes;
  for (auto& a : axes) {
    a.lower = read_le<double>(in);
    a.spacing = read_le<double>(in);
    a.count = read_le<std::int32_t>(in);
  }
  try {
    map.grid_ = InducingGrid(axes);
    map.hyp_ = {read_le<double>(in), read_le<double>(in), read_le<double>(in)};
    map.hyp_.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("corrupt map header: ") + e.what());
  }
  map.jitter_ = read_le<double>(in);
  for (int c = 0; c < 3; ++c) map.offset_[c] = read_le<double>(in);

  map.diag_.measurements = static_cast<Eigen::Index>(read_le<std::uint64_t>(in));
  map.diag_.cg_iterations = read_le<std::int32_t>(in);
  map.diag_.cg_residual = read_le<double>(in);
  map.diag_.cg_converged = read_le<std::uint8_t>(in) != 0;
  map.diag_.lanczos_steps = read_le<std::int32_t>(in);
  map.diag_.lanczos_breakdown = read_le<std::uint8_t>(in) != 0;

  const auto m = read_le<std::uint64_t>(in);
  if (m != static_cast<std::uint64_t>(map.grid_.size())) throw ParseError("mean cache size does not match the grid");
  map.mean_cache_.resize(static_cast<Eigen::Index>(m));
  read_doubles(in, map.mean_cache_.data(), m);

  map.has_variance_ = read_le<std::uint8_t>(in) != 0;
  const auto t = read_le<std::uint64_t>(in);
  if (t > (1u << 20)) throw ParseError("implausible Lanczos rank in map file");
  map.tridiagonal_.diagonal.resize(static_cast<Eigen::Index>(t));
  map.tridiagonal_.off_diagonal.resize(static_cast<Eigen::Index>(t > 0 ? t - 1 : 0));
  read_doubles(in, map.tridiagonal_.diagonal.data(), t);
  read_doubles(in, map.tridiagonal_.off_diagonal.data(), t > 0 ? t - 1 : 0);
  map.love_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t));
  read_doubles(in, map.love_.data(), m * t);
  map.finalize();
  return map;
}

FittedMap FittedMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open map file " + path);
  return load(in);
}

}  // namespace magmap
