// Exact minimum-norm adversarial perturbation for small networks, by
// enumerating every activation pattern and solving the per-region QP on each.

#ifndef RELU_REGIONS_ORACLE_HPP
#define RELU_REGIONS_ORACLE_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "relu_regions/geometry.hpp"
#include "relu_regions/network.hpp"

namespace relu_regions {

class BudgetExceededError : public std::runtime_error {
 public:
  BudgetExceededError(int hidden_units, std::uint64_t cap)
      : std::runtime_error("exact oracle: network has N = " + std::to_string(hidden_units) +
                           " hidden units (2^" + std::to_string(hidden_units) +
                           " patterns), above the cap of " + std::to_string(cap) + " patterns"),
        hidden_units_(hidden_units),
        cap_(cap) {}

  int hidden_units() const { return hidden_units_; }
  std::uint64_t cap() const { return cap_; }

 private:
  int hidden_units_;
  std::uint64_t cap_;
};

struct OracleOptions {
  std::uint64_t budget = std::uint64_t{1} << 20;  // max patterns
  int max_hidden_units = 20;
  int workers = 1;
};

struct OracleResult {
  bool found = false;  // false: no adversarial point inside the box at all
  Vector delta;
  double norm = 0.0;  // infinity when !found
  int target = -1;
  Signature optimal_signature;
  std::uint64_t patterns_enumerated = 0;
  std::uint64_t feasible_patterns = 0;  // patterns whose closed region meets the box
  int solver_errors = 0;
};

/// Global minimum over all patterns s and classes l != classify(x) of the
/// region QP on the closed region of s. Ties go to the lexicographically
/// smallest signature.
OracleResult exact_min_adversarial(const Network& net, const Eigen::Ref<const Vector>& x,
                                   const std::optional<BoxConstraint>& box,
                                   const OracleOptions& options = {});

}  // namespace relu_regions

#endif  // RELU_REGIONS_ORACLE_HPP
