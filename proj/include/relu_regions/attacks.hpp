// Minimum-norm adversarial perturbations on ReLU networks.
//
// The core primitive solves the per-region problem: on the linear region of
// a point y, the network is affine, so "smallest delta such that class l
// beats class c at x + delta, with x + delta inside the region and the input
// box" is a convex QP. rlr_qp() applies it to a randomized sequence of
// regions, alternating an exploration phase around a working set of
// near-best perturbations with a local search around the incumbent.
//
// DeepFool followed by a bisection onto the decision boundary supplies the
// warm start.

#ifndef RELU_REGIONS_ATTACKS_HPP
#define RELU_REGIONS_ATTACKS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <unordered_set>
#include <vector>

#include "relu_regions/geometry.hpp"
#include "relu_regions/network.hpp"

namespace relu_regions {

enum class TargetPolicy {
  automatic,         // all classes for one hidden layer or less, else warm-start class
  all_classes,
  warm_start_class,  // falls back to all classes without a warm start
  explicit_list,
};

struct AttackConfig {
  int n1 = 10;  // working-set size
  int n2 = 10;  // samples per working-set point
  int n3 = 5;   // exploration rounds per outer iteration
  int n4 = 3;   // outer iterations
  double alpha = 1.5;
  TargetPolicy targets = TargetPolicy::automatic;
  std::vector<int> explicit_targets;
  std::optional<BoxConstraint> box;
  std::uint64_t seed = 0;
  double boundary_tol = 1e-6;

  /// Number of points drawn over a whole run, 1 + (n1 n3 + 1) n2 n4; an upper
  /// bound on the regions checked.
  std::int64_t region_budget() const;

  /// Throws std::invalid_argument on out-of-range hyperparameters.
  void validate() const;
};

enum class Phase { init, exploration, local_search };
const char* to_string(Phase phase);

struct Improvement {
  double norm;
  int outer_iteration;  // 0 for the initial incumbent
  Phase phase;
};

struct AttackResult {
  Vector delta;
  double norm = 0.0;
  bool success = false;
  int adversarial_class = -1;
  std::int64_t regions_checked = 0;
  std::int64_t qp_calls = 0;
  int solver_errors = 0;
  /// Candidates whose pushed point failed the forward-pass check.
  int rejected_candidates = 0;
  /// NaN when no usable warm start was supplied.
  double warm_start_norm = 0.0;
  bool warm_start_rejected = false;
  /// Infinity when the region of x itself admits no adversarial point.
  double first_region_norm = 0.0;
  std::vector<Improvement> trace;
  /// Signatures in the order their regions were first solved.
  std::vector<Signature> visited;
};

struct AttackState {
  Vector delta;
  double u = 0.0;
  std::vector<Vector> working_set;
  std::vector<bool> initializer;  // member is still an unmodified copy of the initial incumbent
  std::unordered_set<Signature> visited;
  std::int64_t regions_checked = 0;
};

/// Called after every processed sample.
using AttackObserver = std::function<void(const AttackState&)>;

struct RegionCandidate {
  Vector delta;
  double norm = 0.0;
  int target = -1;
};

struct SubproblemOutcome {
  std::optional<RegionCandidate> best;  // empty: no target class reachable in this region
  int qp_calls = 0;
};

/// Classes to attack, never containing `current`.
std::vector<int> resolve_targets(const AttackConfig& cfg, int num_classes, int hidden_layers,
                                 int current, std::optional<int> warm_class);

/// Best adversarial perturbation of x restricted to the linear region of y.
SubproblemOutcome region_subproblem(const Network& net, const Eigen::Ref<const Vector>& x,
                                    const Eigen::Ref<const Vector>& y, int current,
                                    std::span<const int> targets,
                                    const std::optional<BoxConstraint>& box);

/// Same, for a region whose linearization is already known. `box` is the
/// input constraint set as a polytope over z (zero rows for no box).
SubproblemOutcome solve_region(const Linearization& region, const Eigen::Ref<const Vector>& x,
                               int current, std::span<const int> targets, const Polytope& box);

/// Direction uniform on the sphere, radius uniform on [0, radius]. This is
/// not the uniform law on the ball: small radii are deliberately favoured.
Vector sample_ball(std::mt19937_64& rng, int dim, double radius);

/// classify(x + (1 + push) delta) != current.
bool is_adversarial(const Network& net, const Eigen::Ref<const Vector>& x, int current,
                    const Eigen::Ref<const Vector>& delta, double push);

AttackResult rlr_qp(const Network& net, const Eigen::Ref<const Vector>& x,
                    const std::optional<Vector>& warm_start, const AttackConfig& cfg,
                    const AttackObserver& observer = {});

struct DeepFoolOptions {
  int max_iters = 50;
  double overshoot = 0.02;
};

/// Multi-class DeepFool on the exact local linearization. Iterates are
/// clamped to `box` when one is given. Empty when the class never changes.
std::optional<Vector> deepfool(const Network& net, const Eigen::Ref<const Vector>& x,
                               const DeepFoolOptions& options = {},
                               const std::optional<BoxConstraint>& box = std::nullopt);

/// Bisection on x + t delta, t in [0, 1], keeping the upper end adversarial.
/// Throws std::invalid_argument if x + delta is not adversarial.
Vector boundary_refine(const Network& net, const Eigen::Ref<const Vector>& x,
                       const Eigen::Ref<const Vector>& delta, int iters = 40);

/// Boundary crossing on the segment from x to the origin (clamped into `box`),
/// when the origin is classified differently.
std::optional<Vector> fallback_start(const Network& net, const Eigen::Ref<const Vector>& x,
                                     int iters = 40,
                                     const std::optional<BoxConstraint>& box = std::nullopt);

/// Nearest boundary crossing over segments from x to `samples` uniform
/// points of the box that are classified differently. Deterministic in `seed`.
std::optional<Vector> box_search_start(const Network& net, const Eigen::Ref<const Vector>& x,
                                       const BoxConstraint& box, int samples = 256,
                                       std::uint64_t seed = 0, int iters = 40);

struct WarmStart {
  std::optional<Vector> deepfool;  // raw DeepFool perturbation
  std::optional<Vector> refined;   // starting point handed to rlr_qp
  bool used_fallback = false;
  bool used_box_search = false;
};

/// DeepFool, then bisection to the boundary; segment-to-origin search if
/// DeepFool fails, and a box search if that fails too.
WarmStart compute_warm_start(const Network& net, const Eigen::Ref<const Vector>& x,
                             const std::optional<BoxConstraint>& box,
                             const DeepFoolOptions& options = {}, int refine_iters = 40);

}  // namespace relu_regions

#endif  // RELU_REGIONS_ATTACKS_HPP
