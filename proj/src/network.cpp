#include "relu_regions/network.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace relu_regions {

namespace {

std::string layer_name(std::size_t index) { return "layer " + std::to_string(index + 1); }

void check_input(const Network& net, Eigen::Index size) {
  if (size != net.input_dim()) {
    throw DimensionError("input has dimension " + std::to_string(size) + ", network expects " +
                         std::to_string(net.input_dim()));
  }
}

}  // namespace

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("network has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw DimensionError(layer_name(l) + ": empty weight matrix");
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw DimensionError(layer_name(l) + ": bias has " + std::to_string(layer.bias.size()) +
                           " entries for " + std::to_string(layer.weights.rows()) + " rows");
    }
    if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
      throw DimensionError(layer_name(l) + ": weights have " +
                           std::to_string(layer.weights.cols()) + " columns but " +
                           layer_name(l - 1) + " has " +
                           std::to_string(layers_[l - 1].weights.rows()) + " outputs");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw DimensionError(layer_name(l) + ": non-finite parameter");
    }
  }
}

int Network::hidden_units() const {
  int n = 0;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) n += static_cast<int>(layers_[l].weights.rows());
  return n;
}

std::vector<int> Network::hidden_widths() const {
  std::vector<int> widths;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    widths.push_back(static_cast<int>(layers_[l].weights.rows()));
  }
  return widths;
}

bool Network::operator==(const Network& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& a = layers_[l];
    const Layer& b = other.layers_[l];
    if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols()) return false;
    if (a.weights != b.weights || a.bias != b.bias) return false;
  }
  return true;
}

// Signature ---------------------------------------------------------------

Signature::Signature(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

Signature Signature::from_index(std::uint64_t index, std::size_t size) {
  if (size > 64) throw std::invalid_argument("Signature::from_index: more than 64 units");
  Signature s(size);
  for (std::size_t i = 0; i < size; ++i) s.set(i, (index >> (size - 1 - i)) & 1U);
  return s;
}

void Signature::set(std::size_t i, bool on) {
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  if (on) {
    words_[i / 64] |= mask;
  } else {
    words_[i / 64] &= ~mask;
  }
}

std::size_t Signature::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::string Signature::to_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if ((*this)[i]) s[i] = '1';
  }
  return s;
}

std::size_t Signature::hash() const {
  // FNV-1a over the packed words.
  std::uint64_t h = 1469598103934665603ULL ^ size_;
  for (auto w : words_) {
    h ^= w;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

bool Signature::operator<(const Signature& other) const {
  const std::size_t n = std::min(size_, other.size_);
  for (std::size_t i = 0; i < n; ++i) {
    if ((*this)[i] != other[i]) return other[i];
  }
  return size_ < other.size_;
}

// JSON --------------------------------------------------------------------

Network load_network(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("network JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
    throw ParseError("network JSON: expected an object with a \"layers\" array");
  }

  std::vector<Layer> layers;
  const auto& jl = doc["layers"];
  for (std::size_t l = 0; l < jl.size(); ++l) {
    const auto& entry = jl[l];
    if (!entry.is_object() || !entry.contains("weights") || !entry.contains("bias")) {
      throw ParseError(layer_name(l) + ": expected \"weights\" and \"bias\"");
    }
    const auto& jw = entry["weights"];
    const auto& jb = entry["bias"];
    if (!jw.is_array() || jw.empty() || !jw[0].is_array() || !jb.is_array()) {
      throw ParseError(layer_name(l) + ": weights must be a non-empty array of rows");
    }
    const std::size_t rows = jw.size();
    const std::size_t cols = jw[0].size();
    Layer layer{Matrix(rows, cols), Vector(jb.size())};
    for (std::size_t i = 0; i < rows; ++i) {
      if (!jw[i].is_array() || jw[i].size() != cols) {
        throw DimensionError(layer_name(l) + ": weight row " + std::to_string(i) +
                             " has inconsistent length");
      }
      for (std::size_t j = 0; j < cols; ++j) {
        if (!jw[i][j].is_number()) throw ParseError(layer_name(l) + ": non-numeric weight");
        const double v = jw[i][j].get<double>();
        if (!std::isfinite(v)) throw ParseError(layer_name(l) + ": non-finite weight");
        layer.weights(i, j) = v;
      }
    }
    for (std::size_t i = 0; i < jb.size(); ++i) {
      if (!jb[i].is_number()) throw ParseError(layer_name(l) + ": non-numeric bias");
      const double v = jb[i].get<double>();
      if (!std::isfinite(v)) throw ParseError(layer_name(l) + ": non-finite bias");
      layer.bias(i) = v;
    }
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

Network load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_network(buf.str());
}

std::string serialize_network(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& layer : net.layers()) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) row.push_back(layer.weights(i, j));
      w.push_back(std::move(row));
    }
    nlohmann::json b = nlohmann::json::array();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) b.push_back(layer.bias(i));
    layers.push_back({{"weights", std::move(w)}, {"bias", std::move(b)}});
  }
  return nlohmann::json{{"layers", std::move(layers)}}.dump();
}

// Evaluation --------------------------------------------------------------

LayerTrace forward(const Network& net, const Eigen::Ref<const Vector>& x) {
  check_input(net, x.size());
  const auto& layers = net.layers();
  LayerTrace trace;
  Vector g = x;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Vector f = layers[l].weights * g + layers[l].bias;
    g = f.cwiseMax(0.0);
    trace.preactivations.push_back(std::move(f));
  }
  trace.logits = layers.back().weights * g + layers.back().bias;
  return trace;
}

int argmax(const Eigen::Ref<const Vector>& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = static_cast<int>(i);
  }
  return best;
}

int classify(const Network& net, const Eigen::Ref<const Vector>& x) {
  return argmax(forward(net, x).logits);
}

Signature signature_at(const Network& net, const Eigen::Ref<const Vector>& x) {
  return affine_coefficients(net, x).signature;
}

namespace {

// Carries (V, a) through the layers. When `point` is given the pattern is read
// off its preactivations as they are computed; otherwise `lin.signature` is
// taken as fixed.
void propagate(const Network& net, const Vector* point, Linearization& lin) {
  const auto& layers = net.layers();
  Matrix V;
  Vector a;
  Vector g;
  if (point != nullptr) g = *point;

  std::size_t unit = 0;
  lin.maps.clear();
  lin.maps.reserve(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    AffineMap map = l == 0 ? AffineMap{layer.weights, layer.bias}
                           : AffineMap{layer.weights * V, layer.weights * a + layer.bias};
    if (l + 1 == layers.size()) {
      lin.maps.push_back(std::move(map));
      break;
    }
    V = map.V;
    a = map.a;
    if (point != nullptr) {
      const Vector f = layer.weights * g + layer.bias;
      for (Eigen::Index i = 0; i < f.size(); ++i) lin.signature.set(unit + i, f(i) > 0.0);
      g = f.cwiseMax(0.0);
    }
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
      if (!lin.signature[unit + i]) {
        V.row(i).setZero();
        a(i) = 0.0;
      }
    }
    unit += static_cast<std::size_t>(layer.weights.rows());
    lin.maps.push_back(std::move(map));
  }
}

}  // namespace

Linearization affine_coefficients(const Network& net, const Eigen::Ref<const Vector>& x) {
  check_input(net, x.size());
  Linearization lin;
  lin.signature = Signature(static_cast<std::size_t>(net.hidden_units()));
  const Vector point = x;
  propagate(net, &point, lin);
  return lin;
}

Linearization linearize_pattern(const Network& net, const Signature& pattern) {
  if (pattern.size() != static_cast<std::size_t>(net.hidden_units())) {
    throw DimensionError("pattern has " + std::to_string(pattern.size()) + " bits, network has " +
                         std::to_string(net.hidden_units()) + " hidden units");
  }
  Linearization lin;
  lin.signature = pattern;
  propagate(net, nullptr, lin);
  return lin;
}

Polytope region_polytope(const Linearization& lin) {
  const int d = static_cast<int>(lin.output().V.cols());
  const int n = static_cast<int>(lin.signature.size());
  Matrix A(n, d);
  Vector b(n);
  int row = 0;
  for (std::size_t l = 0; l + 1 < lin.maps.size(); ++l) {
    const AffineMap& map = lin.maps[l];
    for (Eigen::Index i = 0; i < map.V.rows(); ++i, ++row) {
      const double sign = lin.signature[static_cast<std::size_t>(row)] ? 1.0 : -1.0;
      A.row(row) = sign * map.V.row(i);
      b(row) = sign * map.a(i);
    }
  }
  return Polytope(std::move(A), std::move(b));
}

Polytope region_polytope(const Network& net, const Eigen::Ref<const Vector>& x) {
  return region_polytope(affine_coefficients(net, x));
}

Network random_gaussian_network(int input_dim, const std::vector<int>& hidden, int num_classes,
                                std::uint64_t seed, double weight_std, double bias_std) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(num_classes);

  std::vector<Layer> layers;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    Layer layer{Matrix(widths[l], widths[l - 1]), Vector(widths[l])};
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = weight_std * normal(rng);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = bias_std * normal(rng);
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

}  // namespace relu_regions
