#include "relu_regions/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "relu_regions/qp.hpp"

namespace relu_regions {

std::int64_t AttackConfig::region_budget() const {
  return 1 + (static_cast<std::int64_t>(n1) * n3 + 1) * n2 * n4;
}

void AttackConfig::validate() const {
  if (n1 < 1) throw std::invalid_argument("n1 must be >= 1");
  if (n2 < 1) throw std::invalid_argument("n2 must be >= 1");
  if (n3 < 1) throw std::invalid_argument("n3 must be >= 1");
  if (n4 < 1) throw std::invalid_argument("n4 must be >= 1");
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must be > 1");
  if (!(boundary_tol >= 0.0)) throw std::invalid_argument("boundary_tol must be >= 0");
  if (targets == TargetPolicy::explicit_list && explicit_targets.empty()) {
    throw std::invalid_argument("explicit target list is empty");
  }
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::init: return "init";
    case Phase::exploration: return "exploration";
    case Phase::local_search: return "local-search";
  }
  return "unknown";
}

std::vector<int> resolve_targets(const AttackConfig& cfg, int num_classes, int hidden_layers,
                                 int current, std::optional<int> warm_class) {
  std::vector<int> out;
  auto all = [&] {
    for (int l = 0; l < num_classes; ++l) {
      if (l != current) out.push_back(l);
    }
  };
  TargetPolicy policy = cfg.targets;
  if (policy == TargetPolicy::automatic) {
    policy = hidden_layers <= 1 ? TargetPolicy::all_classes : TargetPolicy::warm_start_class;
  }
  switch (policy) {
    case TargetPolicy::all_classes:
    case TargetPolicy::automatic:
      all();
      break;
    case TargetPolicy::warm_start_class:
      if (warm_class && *warm_class != current) {
        out.push_back(*warm_class);
      } else {
        all();
      }
      break;
    case TargetPolicy::explicit_list:
      for (int l : cfg.explicit_targets) {
        if (l < 0 || l >= num_classes) {
          throw std::out_of_range("target class " + std::to_string(l) + " out of range");
        }
        if (l != current && std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
      }
      break;
  }
  return out;
}

SubproblemOutcome solve_region(const Linearization& region, const Eigen::Ref<const Vector>& x,
                               int current, std::span<const int> targets, const Polytope& box) {
  const Polytope Q = region_polytope(region);
  SubproblemOutcome outcome;
  for (int l : targets) {
    if (l == current) continue;
    const Polytope P = adversarial_constraints(region.output(), current, l, Q, box, x);
    ++outcome.qp_calls;
    QpSolution sol = solve_min_norm(P);
    if (!sol.optimal()) continue;
    const double norm = sol.delta.norm();
    if (!outcome.best || norm < outcome.best->norm) {
      outcome.best = RegionCandidate{std::move(sol.delta), norm, l};
    }
  }
  return outcome;
}

SubproblemOutcome region_subproblem(const Network& net, const Eigen::Ref<const Vector>& x,
                                    const Eigen::Ref<const Vector>& y, int current,
                                    std::span<const int> targets,
                                    const std::optional<BoxConstraint>& box) {
  const Polytope C = box ? box_to_polytope(*box) : Polytope(net.input_dim());
  return solve_region(affine_coefficients(net, y), x, current, targets, C);
}

Vector sample_ball(std::mt19937_64& rng, int dim, double radius) {
  if (radius < 0.0) throw std::invalid_argument("sample_ball: negative radius");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector v(dim);
  double n = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v(i) = normal(rng);
    n = v.norm();
  } while (n == 0.0);
  const double rho = radius * uniform(rng);
  Vector eps = (rho / n) * v;
  // Rounding in the scale can leave |eps| a hair above rho.
  const double len = eps.norm();
  if (len > radius) eps *= radius / len;
  return eps;
}

bool is_adversarial(const Network& net, const Eigen::Ref<const Vector>& x, int current,
                    const Eigen::Ref<const Vector>& delta, double push) {
  const Vector z = x + (1.0 + push) * delta;
  return classify(net, z) != current;
}

AttackResult rlr_qp(const Network& net, const Eigen::Ref<const Vector>& x,
                    const std::optional<Vector>& warm_start, const AttackConfig& cfg,
                    const AttackObserver& observer) {
  cfg.validate();
  const int d = net.input_dim();
  if (x.size() != d) throw DimensionError("rlr_qp: input dimension mismatch");
  const int current = classify(net, x);
  const std::int64_t budget = cfg.region_budget();
  const Polytope box = cfg.box ? box_to_polytope(*cfg.box) : Polytope(d);

  AttackResult result;
  result.warm_start_norm = std::numeric_limits<double>::quiet_NaN();
  result.first_region_norm = std::numeric_limits<double>::infinity();

  std::optional<Vector> warm;
  if (warm_start) {
    if (warm_start->size() != d) throw DimensionError("rlr_qp: warm start dimension mismatch");
    if (!is_adversarial(net, x, current, *warm_start, 0.0)) {
      throw std::invalid_argument("rlr_qp: warm start is not adversarial");
    }
    if (is_adversarial(net, x, current, *warm_start, cfg.boundary_tol)) {
      warm = *warm_start;
      result.warm_start_norm = warm->norm();
    } else {
      result.warm_start_rejected = true;
    }
  }
  std::optional<int> warm_class;
  if (warm) warm_class = classify(net, x + (1.0 + cfg.boundary_tol) * *warm);
  const std::vector<int> targets =
      resolve_targets(cfg, net.num_classes(), net.num_hidden_layers(), current, warm_class);

  AttackState state;
  std::mt19937_64 rng(cfg.seed);

  auto visit = [&](const Vector& y) -> std::optional<RegionCandidate> {
    if (state.regions_checked >= budget) return std::nullopt;
    Linearization lin = affine_coefficients(net, y);
    if (!state.visited.insert(lin.signature).second) return std::nullopt;
    ++state.regions_checked;
    result.visited.push_back(lin.signature);
    SubproblemOutcome outcome;
    try {
      outcome = solve_region(lin, x, current, targets, box);
    } catch (const IterationLimitError&) {
      ++result.solver_errors;
      result.qp_calls += static_cast<std::int64_t>(targets.size());
      return std::nullopt;
    }
    result.qp_calls += outcome.qp_calls;
    if (!outcome.best) return std::nullopt;
    if (!is_adversarial(net, x, current, outcome.best->delta, cfg.boundary_tol)) {
      ++result.rejected_candidates;
      return std::nullopt;
    }
    return outcome.best;
  };

  // Region of x itself, then the better of it and the warm start.
  std::optional<RegionCandidate> first = visit(x);
  if (first) result.first_region_norm = first->norm;
  if (first && (!warm || first->norm < warm->norm())) {
    state.delta = first->delta;
  } else if (warm) {
    state.delta = *warm;
  } else {
    result.delta = Vector::Zero(d);
    result.norm = std::numeric_limits<double>::infinity();
    result.regions_checked = state.regions_checked;
    return result;
  }
  state.u = state.delta.norm();
  result.trace.push_back({state.u, 0, Phase::init});
  state.working_set.assign(static_cast<std::size_t>(cfg.n1), state.delta);
  state.initializer.assign(static_cast<std::size_t>(cfg.n1), true);
  if (observer) observer(state);

  auto consider = [&](const RegionCandidate& cand, int outer, Phase phase) {
    if (cand.norm < state.u) {
      state.delta = cand.delta;
      state.u = cand.norm;
      result.trace.push_back({state.u, outer, phase});
      // Members admitted against an older, larger u are refreshed so the
      // set stays within alpha u.
      for (std::size_t i = 0; i < state.working_set.size(); ++i) {
        if (!state.initializer[i] && state.working_set[i].norm() >= cfg.alpha * state.u) {
          state.working_set[i] = state.delta;
        }
      }
    }
    std::size_t worst = 0;
    double worst_norm = state.working_set[0].norm();
    for (std::size_t i = 1; i < state.working_set.size(); ++i) {
      const double n = state.working_set[i].norm();
      if (n > worst_norm) {
        worst = i;
        worst_norm = n;
      }
    }
    if (cand.norm < cfg.alpha * state.u && cand.norm < worst_norm) {
      state.working_set[worst] = cand.delta;
      state.initializer[worst] = false;
    }
  };

  std::vector<Vector> batch;
  batch.reserve(static_cast<std::size_t>(cfg.n1) * cfg.n2);
  for (int outer = 1; outer <= cfg.n4; ++outer) {
    for (int round = 0; round < cfg.n3; ++round) {
      batch.clear();
      const double radius = state.u / outer;
      for (const Vector& s : state.working_set) {
        for (int j = 0; j < cfg.n2; ++j) batch.push_back(x + s + sample_ball(rng, d, radius));
      }
      for (const Vector& y : batch) {
        if (auto cand = visit(y)) consider(*cand, outer, Phase::exploration);
        if (observer) observer(state);
      }
    }
    for (int j = 0; j < cfg.n2; ++j) {
      const Vector y = x + state.delta + sample_ball(rng, d, state.u / outer);
      if (auto cand = visit(y)) consider(*cand, outer, Phase::local_search);
      if (observer) observer(state);
    }
  }

  result.delta = state.delta;
  result.norm = state.u;
  result.success = true;
  result.adversarial_class = classify(net, x + (1.0 + cfg.boundary_tol) * state.delta);
  result.regions_checked = state.regions_checked;
  return result;
}

std::optional<Vector> deepfool(const Network& net, const Eigen::Ref<const Vector>& x,
                               const DeepFoolOptions& options,
                               const std::optional<BoxConstraint>& box) {
  if (options.max_iters < 1) throw std::invalid_argument("deepfool: max_iters must be >= 1");
  if (options.overshoot < 0.0) throw std::invalid_argument("deepfool: negative overshoot");
  const int current = classify(net, x);
  const int K = net.num_classes();
  Vector total = Vector::Zero(x.size());
  Vector z = x;

  for (int it = 0; it < options.max_iters; ++it) {
    const Linearization lin = affine_coefficients(net, z);
    const AffineMap& out = lin.output();
    const Vector logits = out(z);

    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    Vector best_w;
    double best_gap = 0.0;
    for (int l = 0; l < K; ++l) {
      if (l == current) continue;
      Vector w = out.V.row(l) - out.V.row(current);
      const double wn = w.norm();
      if (wn == 0.0) continue;
      const double gap = logits(l) - logits(current);
      const double dist = std::abs(gap) / wn;
      if (dist < best_dist) {
        best = l;
        best_dist = dist;
        best_w = std::move(w);
        best_gap = gap;
      }
    }
    if (best < 0) return std::nullopt;

    total += (std::abs(best_gap) / best_w.squaredNorm()) * best_w;
    z = x + (1.0 + options.overshoot) * total;
    if (box) z = box->clamp(z);
    if (classify(net, z) != current) return Vector(z - x);
  }
  return std::nullopt;
}

Vector boundary_refine(const Network& net, const Eigen::Ref<const Vector>& x,
                       const Eigen::Ref<const Vector>& delta, int iters) {
  const int current = classify(net, x);
  if (!is_adversarial(net, x, current, delta, 0.0)) {
    throw std::invalid_argument("boundary_refine: x + delta is not adversarial");
  }
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (is_adversarial(net, x, current, mid * delta, 0.0)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi * delta;
}

std::optional<Vector> fallback_start(const Network& net, const Eigen::Ref<const Vector>& x,
                                     int iters, const std::optional<BoxConstraint>& box) {
  Vector origin = Vector::Zero(x.size());
  if (box) origin = box->clamp(origin);
  const int current = classify(net, x);
  if (classify(net, origin) == current) return std::nullopt;
  return boundary_refine(net, x, origin - x, iters);
}

std::optional<Vector> box_search_start(const Network& net, const Eigen::Ref<const Vector>& x,
                                       const BoxConstraint& box, int samples, std::uint64_t seed,
                                       int iters) {
  const int current = classify(net, x);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::optional<Vector> best;
  double best_norm = std::numeric_limits<double>::infinity();
  Vector z(x.size());
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      z(i) = box.lower(i) + unit(rng) * (box.upper(i) - box.lower(i));
    }
    if (classify(net, z) == current) continue;
    Vector delta = boundary_refine(net, x, z - x, iters);
    const double n = delta.norm();
    if (n < best_norm) {
      best_norm = n;
      best = std::move(delta);
    }
  }
  return best;
}

WarmStart compute_warm_start(const Network& net, const Eigen::Ref<const Vector>& x,
                             const std::optional<BoxConstraint>& box,
                             const DeepFoolOptions& options, int refine_iters) {
  WarmStart ws;
  ws.deepfool = deepfool(net, x, options, box);
  if (ws.deepfool) {
    ws.refined = boundary_refine(net, x, *ws.deepfool, refine_iters);
  } else {
    ws.refined = fallback_start(net, x, refine_iters, box);
    ws.used_fallback = ws.refined.has_value();
    if (!ws.refined && box) {
      ws.refined = box_search_start(net, x, *box, 256, 0, refine_iters);
      ws.used_box_search = ws.refined.has_value();
    }
  }
  return ws;
}

}  // namespace relu_regions
