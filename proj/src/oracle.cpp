#include "relu_regions/oracle.hpp"

#include <algorithm>
#include <limits>
#include <thread>
#include <vector>

#include "relu_regions/qp.hpp"

namespace relu_regions {

namespace {

struct Partial {
  bool found = false;
  double norm = std::numeric_limits<double>::infinity();
  std::uint64_t index = 0;
  int target = -1;
  Vector delta;
  std::uint64_t enumerated = 0;
  std::uint64_t feasible = 0;
  int solver_errors = 0;
};

void scan(const Network& net, const Vector& x, const Polytope& box, int current,
          std::uint64_t begin, std::uint64_t end, Partial& out) {
  const auto n = static_cast<std::size_t>(net.hidden_units());
  const int K = net.num_classes();
  for (std::uint64_t index = begin; index < end; ++index) {
    ++out.enumerated;
    const Linearization lin = linearize_pattern(net, Signature::from_index(index, n));
    const Polytope Q = region_polytope(lin);
    try {
      if (!solve_min_norm(shift_to_origin(intersect(Q, box), x)).optimal()) continue;
      ++out.feasible;
      for (int l = 0; l < K; ++l) {
        if (l == current) continue;
        QpSolution sol = solve_min_norm(adversarial_constraints(lin.output(), current, l, Q, box, x));
        if (!sol.optimal()) continue;
        const double norm = sol.delta.norm();
        if (norm < out.norm) {
          out.found = true;
          out.norm = norm;
          out.index = index;
          out.target = l;
          out.delta = std::move(sol.delta);
        }
      }
    } catch (const IterationLimitError&) {
      ++out.solver_errors;
    }
  }
}

}  // namespace

OracleResult exact_min_adversarial(const Network& net, const Eigen::Ref<const Vector>& x,
                                   const std::optional<BoxConstraint>& box,
                                   const OracleOptions& options) {
  const int n = net.hidden_units();
  if (n > options.max_hidden_units || n >= 64 ||
      (std::uint64_t{1} << n) > options.budget) {
    const std::uint64_t cap = std::min<std::uint64_t>(
        options.budget, options.max_hidden_units < 64
                            ? std::uint64_t{1} << options.max_hidden_units
                            : std::numeric_limits<std::uint64_t>::max());
    throw BudgetExceededError(n, cap);
  }
  if (x.size() != net.input_dim()) throw DimensionError("oracle: input dimension mismatch");

  const Vector point = x;
  const int current = classify(net, point);
  const Polytope C = box ? box_to_polytope(*box) : Polytope(net.input_dim());
  const std::uint64_t total = std::uint64_t{1} << n;

  const auto workers = static_cast<std::uint64_t>(std::max(1, options.workers));
  const std::uint64_t chunks = std::min(workers, total);
  std::vector<Partial> partials(static_cast<std::size_t>(chunks));
  auto range = [&](std::uint64_t c) { return total * c / chunks; };
  if (chunks == 1) {
    scan(net, point, C, current, 0, total, partials[0]);
  } else {
    std::vector<std::thread> threads;
    for (std::uint64_t c = 0; c < chunks; ++c) {
      threads.emplace_back(scan, std::cref(net), std::cref(point), std::cref(C), current, range(c),
                           range(c + 1), std::ref(partials[static_cast<std::size_t>(c)]));
    }
    for (auto& t : threads) t.join();
  }

  // Chunks are ordered by pattern index, so keeping the first strict minimum
  // preserves the lexicographic tie-break.
  OracleResult result;
  result.norm = std::numeric_limits<double>::infinity();
  const Partial* best = nullptr;
  for (const Partial& p : partials) {
    result.patterns_enumerated += p.enumerated;
    result.feasible_patterns += p.feasible;
    result.solver_errors += p.solver_errors;
    if (p.found && (best == nullptr || p.norm < best->norm)) best = &p;
  }
  if (best != nullptr) {
    result.found = true;
    result.delta = best->delta;
    result.norm = best->norm;
    result.target = best->target;
    result.optimal_signature = Signature::from_index(best->index, static_cast<std::size_t>(n));
  } else {
    result.delta = Vector::Zero(net.input_dim());
  }
  return result;
}

}  // namespace relu_regions
