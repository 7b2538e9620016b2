#include "relu_regions/dataset.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace relu_regions {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& cell, std::size_t row, std::size_t col) {
  const std::string t = trim(cell);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw DatasetError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                       ": invalid number '" + t + "'");
  }
  return v;
}

bool skip_line(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t.front() == '#';
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw DatasetError(path + ": truncated IDX header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

}  // namespace

Dataset parse_dataset_csv(std::istream& in, double lower, double upper) {
  Dataset data;
  data.feature_lower = lower;
  data.feature_upper = upper;
  std::string line;
  std::size_t row = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++row;
    if (skip_line(line)) continue;
    const auto cells = split(line);
    if (cells.size() < 2) {
      throw DatasetError("row " + std::to_string(row) + ": expected label and features");
    }
    const double label = parse_real(cells[0], row, 1);
    if (label < 0 || label != std::floor(label)) {
      throw DatasetError("row " + std::to_string(row) + ", column 1: label must be a non-negative integer");
    }
    const int d = static_cast<int>(cells.size()) - 1;
    if (dim >= 0 && d != dim) {
      throw DatasetError("row " + std::to_string(row) + ": " + std::to_string(d) +
                         " features, previous rows have " + std::to_string(dim));
    }
    dim = d;
    DataPoint p{Vector(d), static_cast<int>(label)};
    for (int j = 0; j < d; ++j) {
      const double v = parse_real(cells[static_cast<std::size_t>(j) + 1], row, static_cast<std::size_t>(j) + 2);
      if (v < lower || v > upper) {
        std::ostringstream msg;
        msg << "row " << row << ", column " << j + 2 << ": feature " << v << " outside ["
            << lower << ", " << upper << "]";
        throw DatasetError(msg.str());
      }
      p.x(j) = v;
    }
    data.points.push_back(std::move(p));
  }
  return data;
}

Dataset load_dataset_csv(const std::string& path, double lower, double upper) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset: " + path);
  return parse_dataset_csv(in, lower, upper);
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> limit) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw DatasetError("cannot open IDX images: " + images_path);
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw DatasetError("cannot open IDX labels: " + labels_path);

  if (read_be32(images, images_path) != 0x00000803U) {
    throw DatasetError(images_path + ": not an IDX3 unsigned-byte image file");
  }
  const std::uint32_t count = read_be32(images, images_path);
  const std::uint32_t rows = read_be32(images, images_path);
  const std::uint32_t cols = read_be32(images, images_path);
  if (read_be32(labels, labels_path) != 0x00000801U) {
    throw DatasetError(labels_path + ": not an IDX1 unsigned-byte label file");
  }
  const std::uint32_t label_count = read_be32(labels, labels_path);
  if (label_count != count) {
    throw DatasetError("IDX image count " + std::to_string(count) + " differs from label count " +
                       std::to_string(label_count));
  }

  const std::size_t n = limit ? std::min<std::size_t>(*limit, count) : count;
  const std::size_t d = static_cast<std::size_t>(rows) * cols;
  Dataset data;
  std::vector<unsigned char> pixels(d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!images.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(d))) {
      throw DatasetError(images_path + ": truncated at image " + std::to_string(i));
    }
    char label = 0;
    if (!labels.get(label)) throw DatasetError(labels_path + ": truncated at label " + std::to_string(i));
    DataPoint p{Vector(static_cast<Eigen::Index>(d)), static_cast<unsigned char>(label)};
    for (std::size_t j = 0; j < d; ++j) p.x(static_cast<Eigen::Index>(j)) = pixels[j] / 255.0;
    data.points.push_back(std::move(p));
  }
  return data;
}

std::vector<Vector> load_perturbations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open perturbation file: " + path);
  std::vector<Vector> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (skip_line(line)) continue;
    const auto cells = split(line);
    Vector v(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t j = 0; j < cells.size(); ++j) v(static_cast<Eigen::Index>(j)) = parse_real(cells[j], row, j + 1);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace relu_regions
