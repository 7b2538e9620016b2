#include <doctest.h>

#include <random>

#include "relu_regions/attacks.hpp"
#include "relu_regions/oracle.hpp"
#include "relu_regions/qp.hpp"
#include "support/oracles.hpp"

using namespace relu_regions;
using namespace relu_regions::testing;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("affine binary classifier has a single pattern") {
  Matrix V(2, 2);
  V << 1, 2, -1, 0;
  const Vector a = vec({0.5, -0.5});
  const Network net({{V, a}});
  const Vector x = vec({0.3, 0.4});
  const int c = classify(net, x);
  const int l = 1 - c;
  const Vector w = V.row(l) - V.row(c);
  const double closed = ((V.row(c) - V.row(l)).dot(x) + a(c) - a(l)) / w.norm();
  const OracleResult r = exact_min_adversarial(net, x, std::nullopt);
  CHECK(r.patterns_enumerated == 1);
  REQUIRE(r.found);
  CHECK(r.norm == doctest::Approx(closed).epsilon(1e-12));
  CHECK(r.target == l);
}

TEST_CASE("one hidden unit: the better of two hand-solved regions") {
  // f0 = relu(z), f1 = 0.5, x = 2 (class 0).
  // active side: z <= 0.5 needed, delta = -1.5
  // inactive side: z <= 0, delta = -2
  Matrix W1(1, 1), W2(2, 1);
  W1 << 1;
  W2 << 1, 0;
  const Network net({{W1, vec({0})}, {W2, vec({0, 0.5})}});
  const Vector x = vec({2});
  REQUIRE(classify(net, x) == 0);
  const OracleResult r = exact_min_adversarial(net, x, BoxConstraint::uniform(1, -1.0, 3.0));
  CHECK(r.patterns_enumerated == 2);
  CHECK(r.feasible_patterns == 2);
  REQUIRE(r.found);
  CHECK(r.delta(0) == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(r.optimal_signature.to_string() == "1");
  CHECK(r.target == 1);

  // The box [1.8, 3] excludes both crossings.
  const OracleResult none = exact_min_adversarial(net, x, BoxConstraint::uniform(1, 1.8, 3.0));
  CHECK_FALSE(none.found);
  CHECK(std::isinf(none.norm));
  CHECK(none.feasible_patterns == 1);
}

TEST_CASE("pattern count and budget") {
  const Network net = random_gaussian_network(3, {4, 2}, 3, 5);
  const Vector x = vec({0.2, 0.5, 0.7});
  const OracleResult r = exact_min_adversarial(net, x, BoxConstraint::uniform(3, 0.0, 1.0));
  CHECK(r.patterns_enumerated == 64);
  CHECK(r.feasible_patterns >= 1);
  CHECK(r.feasible_patterns <= 64);

  OracleOptions tight;
  tight.budget = 32;
  CHECK_THROWS_AS(exact_min_adversarial(net, x, std::nullopt, tight), BudgetExceededError);

  const Network wide = random_gaussian_network(2, {21}, 2, 1);
  try {
    (void)exact_min_adversarial(wide, vec({0.1, 0.1}), std::nullopt);
    FAIL("expected BudgetExceededError");
  } catch (const BudgetExceededError& e) {
    CHECK(e.hidden_units() == 21);
    const std::string msg = e.what();
    CHECK(msg.find("N = 21") != std::string::npos);
    CHECK(msg.find(std::to_string(std::uint64_t{1} << 20)) != std::string::npos);
  }
}

TEST_CASE("parallel enumeration gives the same answer") {
  const Network net = random_gaussian_network(4, {6, 3}, 3, 13);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 3; ++t) {
    const Vector x = random_uniform(rng, 4, 0.0, 1.0);
    const auto box = BoxConstraint::uniform(4, 0.0, 1.0);
    OracleOptions par;
    par.workers = 3;
    const OracleResult a = exact_min_adversarial(net, x, box);
    const OracleResult b = exact_min_adversarial(net, x, box, par);
    CHECK(a.found == b.found);
    CHECK(a.norm == b.norm);
    CHECK(a.optimal_signature == b.optimal_signature);
    CHECK(a.patterns_enumerated == b.patterns_enumerated);
    CHECK(a.feasible_patterns == b.feasible_patterns);
  }
}

TEST_CASE("oracle solution is consistent with its region") {
  std::mt19937_64 rng(71);
  int checked = 0;
  for (int n = 0; n < 3; ++n) {
    const Network net = random_gaussian_network(3, {5, 3}, 3, 40 + static_cast<std::uint64_t>(n));
    const auto box = BoxConstraint::uniform(3, 0.0, 1.0);
    for (int t = 0; t < 4; ++t) {
      const Vector x = random_uniform(rng, 3, 0.0, 1.0);
      const OracleResult r = exact_min_adversarial(net, x, box);
      if (!r.found) continue;
      ++checked;
      CHECK(r.norm == doctest::Approx(r.delta.norm()).epsilon(1e-15));
      const Linearization lin = linearize_pattern(net, r.optimal_signature);
      const Polytope Q = region_polytope(lin);
      CHECK(contains(Q, x + r.delta, 1e-8));
      const QpSolution again = solve_min_norm(
          adversarial_constraints(lin.output(), classify(net, x), r.target, Q, box_to_polytope(box), x));
      REQUIRE(again.optimal());
      CHECK((again.delta - r.delta).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
  CHECK(checked >= 6);
}

TEST_CASE("no procedure beats the oracle") {
  std::mt19937_64 rng(123);
  for (int n = 0; n < 3; ++n) {
    const int d = 3 + n % 2;
    const Network net = random_gaussian_network(d, n == 1 ? std::vector<int>{5, 3} : std::vector<int>{8},
                                                3, 70 + static_cast<std::uint64_t>(n));
    const auto box = BoxConstraint::uniform(d, 0.0, 1.0);
    for (int t = 0; t < 4; ++t) {
      const Vector x = random_uniform(rng, d, 0.0, 1.0);
      const int c = classify(net, x);
      const OracleResult oracle = exact_min_adversarial(net, x, box);
      if (!oracle.found) continue;
      const double floor = oracle.norm - 1e-6;

      const auto df = deepfool(net, x, {}, box);
      if (df) CHECK(df->norm() >= floor);

      AttackConfig cfg;
      cfg.box = box;
      cfg.targets = TargetPolicy::all_classes;
      const WarmStart ws = compute_warm_start(net, x, box);
      const AttackResult r = rlr_qp(net, x, ws.refined, cfg);
      if (r.success) CHECK(r.norm >= floor);

      // random adversarial points inside the box
      for (int s = 0; s < 2000; ++s) {
        const Vector z = random_uniform(rng, d, 0.0, 1.0);
        if (classify(net, z) != c) CHECK((z - x).norm() >= floor);
      }
    }
  }
}

TEST_CASE("rlr_qp reaches the oracle on tiny networks") {
  std::mt19937_64 rng(404);
  int total = 0;
  int matched = 0;
  for (int n = 0; n < 2; ++n) {
    const int d = 4;
    const Network net = random_gaussian_network(d, n == 0 ? std::vector<int>{8} : std::vector<int>{6, 4},
                                                3, 808 + static_cast<std::uint64_t>(n));
    const auto box = BoxConstraint::uniform(d, 0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
      const Vector x = random_uniform(rng, d, 0.0, 1.0);
      const OracleResult oracle = exact_min_adversarial(net, x, box);
      if (!oracle.found) continue;
      AttackConfig cfg;
      cfg.box = box;
      cfg.targets = TargetPolicy::all_classes;
      cfg.seed = static_cast<std::uint64_t>(t);
      const WarmStart ws = compute_warm_start(net, x, box);
      const AttackResult r = rlr_qp(net, x, ws.refined, cfg);
      ++total;
      if (r.success && r.norm <= oracle.norm * (1.0 + 1e-4)) ++matched;
    }
  }
  REQUIRE(total >= 10);
  CHECK(static_cast<double>(matched) >= 0.95 * total);
}
