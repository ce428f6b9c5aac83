#include "magmap/types.hpp"

#include <cmath>
#include <string>

namespace magmap {

void Hyperparameters::validate() const {
  auto check = [](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw InvalidArgument(std::string("hyperparameter ") + name + " must be finite and > 0, got " +
                            std::to_string(v));
    }
  };
  check(length_scale, "length_scale");
  check(signal_variance, "signal_variance");
  check(noise_variance, "noise_variance");
}

void TrainingSet::validate() const {
  if (positions.rows() != measurements.rows()) {
    throw InvalidArgument("training set: " + std::to_string(positions.rows()) + " positions but " +
                          std::to_string(measurements.rows()) + " measurements");
  }
  if (!positions.allFinite() || !measurements.allFinite()) {
    throw InvalidArgument("training set contains non-finite values");
  }
}

TrainingSet make_training_set(Points positions, Points raw_measurements) {
  TrainingSet set;
  set.positions = std::move(positions);
  set.measurements = std::move(raw_measurements);
  set.validate();
  if (set.size() > 0) {
    set.component_means = set.measurements.colwise().mean().transpose();
    set.measurements.rowwise() -= set.component_means.transpose();
  }
  return set;
}

Points select_rows(const Points& p, const std::vector<Eigen::Index>& rows) {
  Points out(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = p.row(rows[i]);
  }
  return out;
}

TrainingSet select_rows(const TrainingSet& set, const std::vector<Eigen::Index>& rows) {
  TrainingSet out;
  out.positions = select_rows(set.positions, rows);
  out.measurements = select_rows(set.measurements, rows);
  out.component_means = set.component_means;
  return out;
}

}  // namespace magmap
