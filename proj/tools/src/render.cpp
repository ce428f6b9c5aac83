#include "magmap_cli/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "magmap_cli/config.hpp"

namespace magmap::cli {

namespace {

Eigen::VectorXd slice_values(const MapTable& table, int z_index, const Eigen::VectorXd& per_node) {
  table.validate();
  if (table.shape[2] > 1 && z_index < 0) {
    throw ConfigError("map table has " + std::to_string(table.shape[2]) + " z slices; choose one with --z-index");
  }
  const int k = std::max(z_index, 0);
  if (k >= table.shape[2]) {
    throw ConfigError("z index " + std::to_string(k) + " out of range [0, " + std::to_string(table.shape[2] - 1) + "]");
  }
  const Eigen::Index plane = static_cast<Eigen::Index>(table.shape[0]) * table.shape[1];
  return per_node.segment(k * plane, plane);
}

Image to_image(const MapTable& table, const Eigen::VectorXd& unit_values) {
  Image img;
  img.width = table.shape[0];
  img.height = table.shape[1];
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int j = 0; j < img.height; ++j) {
    for (int i = 0; i < img.width; ++i) {
      const double v = std::clamp(unit_values[static_cast<Eigen::Index>(j) * img.width + i], 0.0, 1.0);
      img.pixels[static_cast<std::size_t>(img.height - 1 - j) * img.width + i] =
          static_cast<unsigned char>(std::lround(255.0 * v));
    }
  }
  return img;
}

// Min-max normalization; a constant input maps to zeros.
Eigen::VectorXd normalized(const Eigen::VectorXd& v) {
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  if (!(hi > lo)) return Eigen::VectorXd::Zero(v.size());
  return (v.array() - lo) / (hi - lo);
}

}  // namespace

Image render_magnitude(const MapTable& table, int z_index) {
  const Eigen::VectorXd m = slice_values(table, z_index, table.magnitude);
  return to_image(table, (1.0 - normalized(m).array()).matrix());
}

Image render_certainty(const MapTable& table, int z_index) {
  const Eigen::VectorXd sd = (table.variance.rowwise().sum() / 3.0).cwiseMax(0.0).cwiseSqrt();
  return to_image(table, (1.0 - normalized(slice_values(table, z_index, sd)).array()).matrix());
}

void write_pgm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error("failed writing " + path);
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int maxval = 0;
  Image img;
  if (!(in >> magic >> img.width >> img.height >> maxval) || magic != "P5" || maxval != 255) {
    throw ParseError(path + ": not an 8-bit binary PGM");
  }
  in.get();
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw ParseError(path + ": truncated pixel data");
  return img;
}

}  // namespace magmap::cli
