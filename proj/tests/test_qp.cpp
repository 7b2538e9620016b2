#include <doctest.h>

#include <random>

#include "relu_regions/geometry.hpp"
#include "relu_regions/qp.hpp"
#include "support/oracles.hpp"

using namespace relu_regions;
using namespace relu_regions::testing;

namespace {

Polytope rows(std::initializer_list<std::initializer_list<double>> a, std::initializer_list<double> b) {
  const auto m = static_cast<Eigen::Index>(a.size());
  const auto d = static_cast<Eigen::Index>(a.begin()->size());
  Matrix A(m, d);
  Vector bv(m);
  Eigen::Index i = 0;
  for (const auto& r : a) {
    Eigen::Index j = 0;
    for (double v : r) A(i, j++) = v;
    ++i;
  }
  i = 0;
  for (double v : b) bv(i++) = v;
  return Polytope(A, bv);
}

}  // namespace

TEST_CASE("unconstrained problem has the origin as minimizer") {
  const QpSolution s = solve_min_norm(Polytope(3));
  REQUIRE(s.optimal());
  CHECK(s.delta.norm() == 0.0);
  CHECK(s.multipliers.size() == 0);
}

TEST_CASE("projection onto a half-space") {
  const Polytope P = rows({{1, 0}}, {-1});
  const QpSolution s = solve_min_norm(P);
  REQUIRE(s.optimal());
  CHECK(s.delta(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(s.delta(1)) <= 1e-14);
  CHECK(s.multipliers(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(check_kkt(P, s.delta, s.multipliers).ok);
}

TEST_CASE("contradictory bounds are infeasible with a certificate") {
  const Polytope P = rows({{1}, {-1}}, {-1, 0});
  const QpSolution s = solve_min_norm(P);
  CHECK(s.status == QpStatus::infeasible);
  CHECK(check_infeasibility_certificate(P, s.certificate));
  CHECK_FALSE(feasible_point(P).has_value());
}

TEST_CASE("zero rows") {
  SUBCASE("vacuous") {
    const Polytope P = rows({{0, 0}, {1, 1}}, {2, -2});
    const QpSolution s = solve_min_norm(P);
    REQUIRE(s.optimal());
    CHECK(s.delta(0) == doctest::Approx(1.0));
    CHECK(s.delta(1) == doctest::Approx(1.0));
  }
  SUBCASE("contradiction") {
    const Polytope P = rows({{0, 0}, {1, 1}}, {-1, -2});
    const QpSolution s = solve_min_norm(P);
    CHECK(s.status == QpStatus::infeasible);
    CHECK(check_infeasibility_certificate(P, s.certificate));
  }
}

TEST_CASE("feasible_point") {
  CHECK(feasible_point(Polytope(2)).value().norm() == 0.0);
  // unit box centred at the origin
  const Polytope box = box_to_polytope(BoxConstraint::uniform(3, -1.0, 1.0));
  const auto p = feasible_point(box);
  REQUIRE(p.has_value());
  CHECK(contains(box, *p, 1e-8));
  const Polytope shifted = box_to_polytope(BoxConstraint::uniform(3, 2.0, 3.0));
  const auto q = feasible_point(shifted);
  REQUIRE(q.has_value());
  CHECK(contains(shifted, *q, 1e-8));
}

TEST_CASE("solver matches active-set enumeration on random problems") {
  std::mt19937_64 rng(12345);
  int feasible = 0;
  int infeasible = 0;
  for (int t = 0; t < 1000; ++t) {
    const Polytope P = random_qp(rng);
    const EnumeratedQp ref = enumerate_min_norm(P.A(), P.b());
    const QpSolution s = solve_min_norm(P);
    CAPTURE(t);
    REQUIRE(s.optimal() == ref.feasible);
    if (s.optimal()) {
      ++feasible;
      CHECK(std::abs(s.delta.norm() - ref.norm) <= 1e-7);
      const KktReport kkt = check_kkt(P, s.delta, s.multipliers);
      CHECK(kkt.ok);
    } else {
      ++infeasible;
      CHECK(check_infeasibility_certificate(P, s.certificate));
    }
  }
  CHECK(feasible > 100);
  CHECK(infeasible > 100);
}

TEST_CASE("feasible_point status agrees with enumeration") {
  std::mt19937_64 rng(777);
  for (int t = 0; t < 500; ++t) {
    const Polytope P = random_qp(rng);
    const EnumeratedQp ref = enumerate_min_norm(P.A(), P.b());
    const auto p = feasible_point(P);
    CAPTURE(t);
    REQUIRE(p.has_value() == ref.feasible);
    if (p) CHECK(contains(P, *p, 1e-8));
  }
}

TEST_CASE("positive row scaling leaves the minimizer unchanged") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  int compared = 0;
  for (int t = 0; t < 300; ++t) {
    const Polytope P = random_qp(rng);
    Matrix A = P.A();
    Vector b = P.b();
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const double s = scale(rng);
      A.row(i) *= s;
      b(i) *= s;
    }
    const QpSolution s1 = solve_min_norm(P);
    const QpSolution s2 = solve_min_norm(Polytope(A, b));
    REQUIRE(s1.status == s2.status);
    if (s1.optimal()) {
      ++compared;
      CHECK((s1.delta - s2.delta).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
  CHECK(compared > 50);
}

TEST_CASE("repeated solves are bitwise identical") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const Polytope P = random_qp(rng);
    const QpSolution a = solve_min_norm(P);
    const QpSolution b = solve_min_norm(P);
    CHECK(a.status == b.status);
    if (a.optimal()) CHECK(a.delta == b.delta);
  }
}

TEST_CASE("duplicate rows are tolerated") {
  const Polytope P = rows({{1, 1}, {1, 1}, {2, 2}, {0, 1}}, {-1, -1, -2, -0.2});
  const QpSolution s = solve_min_norm(P);
  REQUIRE(s.optimal());
  CHECK(s.delta(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.delta(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(check_kkt(P, s.delta, s.multipliers).ok);
}

TEST_CASE("the iteration cap raises an error instead of returning") {
  std::mt19937_64 rng(3);
  const Polytope P(random_normal(rng, 10, 4), random_normal(rng, 10));
  QpOptions opts;
  opts.max_iterations = 1;
  bool raised = false;
  // A problem needing more than one NNLS step must raise; one that does not
  // must still be correct.
  try {
    const QpSolution s = solve_min_norm(P, opts);
    const EnumeratedQp ref = enumerate_min_norm(P.A(), P.b());
    CHECK(s.optimal() == ref.feasible);
  } catch (const IterationLimitError& e) {
    raised = true;
    CHECK(e.iterations() == 1);
    CHECK(std::string(e.what()).find("iteration limit") != std::string::npos);
  }
  CHECK(raised);
}

TEST_CASE("the KKT checker rejects perturbed solutions") {
  const Polytope P = rows({{1, 0}, {0, 1}}, {-1, -1});
  const QpSolution s = solve_min_norm(P);
  REQUIRE(s.optimal());
  REQUIRE(check_kkt(P, s.delta, s.multipliers).ok);

  Vector bad_delta = s.delta;
  bad_delta(0) -= 1e-6;
  CHECK_FALSE(check_kkt(P, bad_delta, s.multipliers).ok);

  Vector negative = s.multipliers;
  negative(0) = -1e-6;
  CHECK_FALSE(check_kkt(P, s.delta, negative).ok);

  // Feasible, stationary, but multiplier on a slack row.
  const Polytope loose = rows({{1, 0}, {0, 1}}, {-1, 5});
  Vector lam(2);
  lam << 1.0, 0.0;
  Vector d(2);
  d << 1.0, 0.0;
  CHECK(check_kkt(loose, d, lam).ok);
  lam(1) = 1e-3;
  d(1) = 1e-3;
  CHECK_FALSE(check_kkt(loose, d, lam).ok);
}

TEST_CASE("certificate checker rejects non-certificates") {
  const Polytope P = rows({{1}, {-1}}, {-1, 0});
  Vector y(2);
  y << 1, 1;
  CHECK(check_infeasibility_certificate(P, y));
  y << 1, 0.5;
  CHECK_FALSE(check_infeasibility_certificate(P, y));
  y << -1, -1;
  CHECK_FALSE(check_infeasibility_certificate(P, y));
}
