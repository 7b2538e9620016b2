// Fully connected ReLU classifiers and their local affine structure.
//
// On the linear region containing an input x, every layer of a ReLU network
// is an exact affine function of the input, f^(k)(z) = V^(k) z + a^(k). The
// region itself is the polytope cut out by the sign pattern of the hidden
// preactivations. This header provides evaluation, the per-region affine maps
// and the activation signature that identifies a region.

#ifndef RELU_REGIONS_NETWORK_HPP
#define RELU_REGIONS_NETWORK_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "relu_regions/geometry.hpp"

namespace relu_regions {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Layer {
  Matrix weights;  // n_l x n_{l-1}
  Vector bias;     // n_l
};

/**
 * An immutable fully connected ReLU network. All layers but the last are
 * followed by a ReLU; the last layer produces the class logits.
 */
class Network {
 public:
  /// Validates shapes and finiteness; throws DimensionError naming the layer.
  explicit Network(std::vector<Layer> layers);

  int input_dim() const { return static_cast<int>(layers_.front().weights.cols()); }
  int num_classes() const { return static_cast<int>(layers_.back().weights.rows()); }
  /// Number of hidden (ReLU) layers; 0 for a globally affine classifier.
  int num_hidden_layers() const { return static_cast<int>(layers_.size()) - 1; }
  /// Total hidden units N, which is also the row count of a region polytope.
  int hidden_units() const;
  std::vector<int> hidden_widths() const;

  const std::vector<Layer>& layers() const { return layers_; }

  bool operator==(const Network& other) const;

 private:
  std::vector<Layer> layers_;
};

struct LayerTrace {
  std::vector<Vector> preactivations;  // f^(1..L)
  Vector logits;                       // f^(L+1)

  Vector post_activation(std::size_t k) const {
    return preactivations.at(k).cwiseMax(0.0);
  }
};

/**
 * One bit per hidden unit, layer-major. Bit i is set iff the unit's
 * preactivation is strictly positive; a zero preactivation counts as inactive.
 *
 * Ordering is lexicographic on the bit sequence (bit 0 first), which matches
 * the numeric order of from_index().
 */
class Signature {
 public:
  Signature() = default;
  explicit Signature(std::size_t size);

  /// Pattern number `index` in lexicographic order; bit 0 is the most significant.
  static Signature from_index(std::uint64_t index, std::size_t size);

  std::size_t size() const { return size_; }
  bool operator[](std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  void set(std::size_t i, bool on);
  std::size_t count() const;

  std::string to_string() const;
  std::size_t hash() const;

  bool operator==(const Signature& other) const = default;
  bool operator<(const Signature& other) const;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Exact affine description of a network on one linear region.
struct Linearization {
  std::vector<AffineMap> maps;  // k = 1..L+1; maps.back() gives the logits
  Signature signature;

  const AffineMap& output() const { return maps.back(); }
};

Network load_network(std::string_view document);
Network load_network_file(const std::string& path);
std::string serialize_network(const Network& net);

LayerTrace forward(const Network& net, const Eigen::Ref<const Vector>& x);

/// Index of the largest entry; the lowest index wins ties.
int argmax(const Eigen::Ref<const Vector>& values);
int classify(const Network& net, const Eigen::Ref<const Vector>& x);

Signature signature_at(const Network& net, const Eigen::Ref<const Vector>& x);

/// Affine maps of every layer on the region containing x, carried layer by
/// layer alongside the forward pass.
Linearization affine_coefficients(const Network& net, const Eigen::Ref<const Vector>& x);

/// Affine maps implied by a fixed activation pattern, with no reference point.
/// Used to enumerate regions symbolically.
Linearization linearize_pattern(const Network& net, const Signature& pattern);

/// Rows Delta^(l) (V^(l) z + a^(l)) >= 0 for every hidden unit, with Delta = +1
/// on active units and -1 on inactive ones.
Polytope region_polytope(const Linearization& lin);
Polytope region_polytope(const Network& net, const Eigen::Ref<const Vector>& x);

/// Gaussian weights and biases; deterministic for a given seed.
Network random_gaussian_network(int input_dim, const std::vector<int>& hidden, int num_classes,
                                std::uint64_t seed, double weight_std = 1.0,
                                double bias_std = 1.0);

}  // namespace relu_regions

template <>
struct std::hash<relu_regions::Signature> {
  std::size_t operator()(const relu_regions::Signature& s) const noexcept { return s.hash(); }
};

#endif  // RELU_REGIONS_NETWORK_HPP
