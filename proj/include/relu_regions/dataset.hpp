// Labelled input points. CSV rows are `label,x1,...,xd`; IDX image/label
// pairs (the MNIST layout) are scaled to [0, 1] by 1/255.

#ifndef RELU_REGIONS_DATASET_HPP
#define RELU_REGIONS_DATASET_HPP

#include <cstddef>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relu_regions/geometry.hpp"

namespace relu_regions {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataPoint {
  Vector x;
  int label = 0;
};

struct Dataset {
  std::vector<DataPoint> points;
  double feature_lower = 0.0;
  double feature_upper = 1.0;

  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().x.size()); }
};

/// Features outside [lower, upper] are rejected with the row and column named.
/// Blank lines and lines starting with '#' are skipped.
Dataset parse_dataset_csv(std::istream& in, double lower = 0.0, double upper = 1.0);
Dataset load_dataset_csv(const std::string& path, double lower = 0.0, double upper = 1.0);

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> limit = std::nullopt);

/// One perturbation per row, `d1,...,dd`, same comment rules as datasets.
std::vector<Vector> load_perturbations_csv(const std::string& path);

}  // namespace relu_regions

#endif  // RELU_REGIONS_DATASET_HPP
