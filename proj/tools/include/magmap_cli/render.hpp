#pragma once

#include <string>
#include <vector>

#include "magmap/map_table.hpp"

namespace magmap::cli {

/// 8-bit grayscale raster, row 0 at the top.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;

  unsigned char at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Magnitude heatmap of one z slice: darker means stronger. Lattice x runs
/// left to right, y bottom to top.
Image render_magnitude(const MapTable& table, int z_index);

/// Certainty channel: 1 - normalized standard deviation, where the standard
/// deviation is sqrt of the mean variance diagonal and normalization is
/// min-max over the slice. A constant slice renders fully certain.
Image render_certainty(const MapTable& table, int z_index);

/// Binary PGM (P5).
void write_pgm(const Image& image, const std::string& path);
Image read_pgm(const std::string& path);

}  // namespace magmap::cli
