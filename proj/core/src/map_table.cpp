#include "magmap/map_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <string_view>
#include <vector>

namespace magmap {

Eigen::Index Lattice::size() const {
  Eigen::Index n = 1;
  for (const auto& a : axes) n *= a.count;
  return n;
}

Vec3 Lattice::node(Eigen::Index index) const {
  if (index < 0 || index >= size()) throw InvalidArgument("Lattice::node: index out of range");
  const auto nx = axes[0].count;
  const auto ny = axes[1].count;
  const auto i = static_cast<int>(index % nx);
  const auto j = static_cast<int>((index / nx) % ny);
  const auto k = static_cast<int>(index / (static_cast<Eigen::Index>(nx) * ny));
  return {axes[0].node(i), axes[1].node(j), axes[2].node(k)};
}

void Lattice::validate() const {
  const char* name[3] = {"x", "y", "z"};
  for (int d = 0; d < 3; ++d) {
    const auto& a = axes[static_cast<std::size_t>(d)];
    if (a.count < 1) throw InvalidArgument(std::string("lattice: ") + name[d] + " count must be >= 1");
    if (!std::isfinite(a.lower) || !std::isfinite(a.upper)) {
      throw InvalidArgument(std::string("lattice: ") + name[d] + " bounds must be finite");
    }
    if (a.count > 1 && !(a.upper > a.lower)) {
      throw InvalidArgument(std::string("lattice: ") + name[d] + " upper must exceed lower when count > 1");
    }
  }
}

void MapTable::validate() const {
  const Eigen::Index n = positions.rows();
  if (static_cast<Eigen::Index>(shape[0]) * shape[1] * shape[2] != n) {
    throw InvalidArgument("MapTable: shape does not match the number of nodes");
  }
  if (mean.rows() != n || variance.rows() != n || magnitude.size() != n) {
    throw InvalidArgument("MapTable: column lengths disagree");
  }
}

void save_map(const MapTable& table, const std::string& path) {
  table.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "x,y,z,mean_x,mean_y,mean_z,var_x,var_y,var_z,magnitude\n";
  out.precision(17);
  for (Eigen::Index n = 0; n < table.size(); ++n) {
    for (int c = 0; c < 3; ++c) out << table.positions(n, c) << ',';
    for (int c = 0; c < 3; ++c) out << table.mean(n, c) << ',';
    for (int c = 0; c < 3; ++c) out << table.variance(n, c) << ',';
    out << table.magnitude[n] << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

MapTable load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open map file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header line");
  std::vector<std::array<double, 10>> rows;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::array<double, 10> v{};
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t c = 0; c < 10; ++c) {
      while (p < end && *p == ' ') ++p;
      const auto res = std::from_chars(p, end, v[c]);
      if (res.ec != std::errc()) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad value in column " + std::to_string(c + 1));
      }
      p = res.ptr;
      while (p < end && (*p == ' ' || *p == '\r')) ++p;
      if (c < 9) {
        if (p == end || *p != ',') throw ParseError(path + ":" + std::to_string(line_no) + ": expected 10 columns");
        ++p;
      }
    }
    if (p != end) throw ParseError(path + ":" + std::to_string(line_no) + ": trailing characters");
    rows.push_back(v);
  }

  MapTable t;
  const auto n = static_cast<Eigen::Index>(rows.size());
  t.positions.resize(n, 3);
  t.mean.resize(n, 3);
  t.variance.resize(n, 3);
  t.magnitude.resize(n);
  std::array<std::set<double>, 3> distinct;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& v = rows[static_cast<std::size_t>(i)];
    for (int c = 0; c < 3; ++c) {
      t.positions(i, c) = v[static_cast<std::size_t>(c)];
      t.mean(i, c) = v[static_cast<std::size_t>(3 + c)];
      t.variance(i, c) = v[static_cast<std::size_t>(6 + c)];
      distinct[static_cast<std::size_t>(c)].insert(v[static_cast<std::size_t>(c)]);
    }
    t.magnitude[i] = v[9];
  }
  for (int c = 0; c < 3; ++c) t.shape[static_cast<std::size_t>(c)] = static_cast<int>(distinct[static_cast<std::size_t>(c)].size());
  if (n == 0 || static_cast<Eigen::Index>(t.shape[0]) * t.shape[1] * t.shape[2] != n) {
    throw ParseError(path + ": rows do not form a regular lattice");
  }
  return t;
}

}  // namespace magmap
