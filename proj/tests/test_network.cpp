#include <doctest.h>

#include <random>

#include "relu_regions/geometry.hpp"
#include "relu_regions/network.hpp"
#include "support/oracles.hpp"

using namespace relu_regions;
using namespace relu_regions::testing;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) M(i, j++) = v;
    ++i;
  }
  return M;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::vector<bool> to_bits(const Signature& s) {
  std::vector<bool> bits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) bits[i] = s[i];
  return bits;
}

}  // namespace

TEST_CASE("load_network parses a single affine layer") {
  const Network net = load_network(R"({"layers":[{"weights":[[1,0],[0,1],[-1,-1]],"bias":[0,0,0]}]})");
  CHECK(net.input_dim() == 2);
  CHECK(net.num_classes() == 3);
  CHECK(net.num_hidden_layers() == 0);
  CHECK(net.hidden_units() == 0);
}

TEST_CASE("load_network rejects malformed documents") {
  SUBCASE("column count mismatch names the layer") {
    const char* doc = R"({"layers":[{"weights":[[1,0],[0,1]],"bias":[0,0]},
                                     {"weights":[[1,0,0]],"bias":[0]}]})";
    try {
      (void)load_network(doc);
      FAIL("expected a dimension error");
    } catch (const DimensionError& e) {
      CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
    }
  }
  SUBCASE("bias length mismatch") {
    CHECK_THROWS_AS(load_network(R"({"layers":[{"weights":[[1,0]],"bias":[0,0]}]})"), DimensionError);
  }
  SUBCASE("ragged rows") {
    CHECK_THROWS(load_network(R"({"layers":[{"weights":[[1,0],[1]],"bias":[0,0]}]})"));
  }
  SUBCASE("not json") { CHECK_THROWS_AS(load_network("{layers"), ParseError); }
  SUBCASE("missing layers") { CHECK_THROWS_AS(load_network(R"({"weights":[]})"), ParseError); }
  SUBCASE("non-finite literal") {
    CHECK_THROWS(load_network(R"({"layers":[{"weights":[[NaN]],"bias":[0]}]})"));
    CHECK_THROWS(load_network(R"({"layers":[{"weights":[[1e999]],"bias":[0]}]})"));
  }
}

TEST_CASE("serialize then load is the identity") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Network net = random_gaussian_network(3, {5, 4}, 3, seed);
    CHECK(load_network(serialize_network(net)) == net);
  }
}

TEST_CASE("forward on hand-sized networks") {
  SUBCASE("affine") {
    const Network net({{mat({{2}}), vec({1})}});
    CHECK(forward(net, vec({3})).logits(0) == doctest::Approx(7.0));
  }
  SUBCASE("ReLU clamps a negative unit") {
    const Network net({{mat({{1}}), vec({-1})}, {mat({{1}}), vec({0})}});
    const LayerTrace t = forward(net, vec({0.5}));
    CHECK(t.preactivations.at(0)(0) == doctest::Approx(-0.5));
    CHECK(t.post_activation(0)(0) == 0.0);
    CHECK(t.logits(0) == 0.0);
  }
  SUBCASE("dimension mismatch") {
    const Network net({{mat({{2}}), vec({1})}});
    CHECK_THROWS_AS(forward(net, vec({1, 2})), DimensionError);
  }
}

TEST_CASE("forward agrees with a loop-based evaluation") {
  std::mt19937_64 rng(11);
  const Network net = random_gaussian_network(5, {7}, 4, 3);
  for (int i = 0; i < 100; ++i) {
    const Vector x = random_normal(rng, 5);
    const Vector logits = forward(net, x).logits;
    const std::vector<double> ref = reference_logits(net, x);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(logits(k) - ref[static_cast<std::size_t>(k)]) <= 1e-12);
  }
}

TEST_CASE("classify picks the lowest index among maximal logits") {
  CHECK(argmax(vec({0.1, 0.9, 0.2})) == 1);
  CHECK(argmax(vec({0.5, 0.5})) == 0);
  std::mt19937_64 rng(5);
  const Network net = random_gaussian_network(3, {6}, 5, 9);
  for (int i = 0; i < 50; ++i) {
    const Vector x = random_normal(rng, 3);
    const std::vector<double> ref = reference_logits(net, x);
    int best = 0;
    for (int k = 1; k < 5; ++k) {
      if (ref[static_cast<std::size_t>(k)] > ref[static_cast<std::size_t>(best)]) best = k;
    }
    CHECK(classify(net, x) == best);
  }
}

TEST_CASE("signature bits follow the strict-positive rule") {
  const Network net({{mat({{1}, {-1}}), vec({0, 0})}, {mat({{1, 1}}), vec({0})}});
  const Signature s = signature_at(net, vec({0.0}));
  CHECK(s.size() == 2);
  CHECK_FALSE(s[0]);
  CHECK_FALSE(s[1]);
  CHECK(signature_at(net, vec({1.0})).to_string() == "10");
  CHECK(signature_at(net, vec({-1.0})).to_string() == "01");
}

TEST_CASE("Signature ordering and index mapping") {
  const Signature a = Signature::from_index(0b0101, 4);
  CHECK(a.to_string() == "0101");
  CHECK(a.count() == 2);
  for (std::uint64_t i = 0; i + 1 < 16; ++i) {
    CHECK(Signature::from_index(i, 4) < Signature::from_index(i + 1, 4));
  }
  Signature big(130);
  big.set(129, true);
  CHECK(big[129]);
  CHECK(big.count() == 1);
  CHECK(std::hash<Signature>{}(big) == big.hash());
}

TEST_CASE("affine_coefficients on hand-sized networks") {
  SUBCASE("no hidden layer returns the layer itself") {
    const Network net({{mat({{1, 2}, {3, 4}}), vec({5, 6})}});
    const Linearization lin = affine_coefficients(net, vec({0.3, -0.2}));
    CHECK(lin.maps.size() == 1);
    CHECK(lin.output().V == net.layers()[0].weights);
    CHECK(lin.output().a == net.layers()[0].bias);
    CHECK(lin.signature.size() == 0);
  }
  SUBCASE("all units active gives the product of the layers") {
    const Network net({{mat({{1, 0}, {0, 2}}), vec({1, 1})}, {mat({{1, -1}, {2, 3}}), vec({0.5, -0.5})}});
    const Vector x = vec({1, 1});
    const Linearization lin = affine_coefficients(net, x);
    const Matrix W2W1 = net.layers()[1].weights * net.layers()[0].weights;
    const Vector a2 = net.layers()[1].weights * net.layers()[0].bias + net.layers()[1].bias;
    CHECK((lin.output().V - W2W1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((lin.output().a - a2).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("incremental maps match the explicit product formulas") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = random_gaussian_network(4, {6, 5, 3}, 3, 100 + static_cast<std::uint64_t>(trial));
    const Vector x = random_normal(rng, 4);
    const Linearization lin = affine_coefficients(net, x);
    const auto ref = reference_affine(net, reference_pattern(net, x));
    REQUIRE(lin.maps.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
      const double scale = 1.0 + ref[k].V.cwiseAbs().maxCoeff() + ref[k].a.cwiseAbs().maxCoeff();
      CHECK((lin.maps[k].V - ref[k].V).cwiseAbs().maxCoeff() <= 1e-12 * scale);
      CHECK((lin.maps[k].a - ref[k].a).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    }
    const std::vector<double> logits = reference_logits(net, x);
    const Vector lin_logits = lin.output()(x);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(lin_logits(k) - logits[static_cast<std::size_t>(k)]) <= 1e-9);
  }
}

TEST_CASE("linearize_pattern agrees with the point-based construction") {
  std::mt19937_64 rng(23);
  const Network net = random_gaussian_network(3, {4, 3}, 2, 77);
  for (int i = 0; i < 20; ++i) {
    const Vector x = random_normal(rng, 3);
    const Linearization a = affine_coefficients(net, x);
    const Linearization b = linearize_pattern(net, a.signature);
    CHECK(a.signature == b.signature);
    CHECK((a.output().V - b.output().V).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((a.output().a - b.output().a).cwiseAbs().maxCoeff() <= 1e-14);
  }
  CHECK_THROWS_AS(linearize_pattern(net, Signature(5)), DimensionError);
}

TEST_CASE("region_polytope row count and membership of x") {
  const Network affine({{mat({{1, 0}}), vec({0})}});
  CHECK(region_polytope(affine, vec({0.1, 0.2})).rows() == 0);

  std::mt19937_64 rng(3);
  const Network net = random_gaussian_network(3, {5, 4, 2}, 3, 8);
  CHECK(net.hidden_units() == 11);
  for (int i = 0; i < 30; ++i) {
    const Vector x = random_normal(rng, 3);
    const Polytope Q = region_polytope(net, x);
    CHECK(Q.rows() == 11);
    CHECK(contains(Q, x, 0.0));
  }
}

TEST_CASE("points inside the region share its signature and its affine map") {
  std::mt19937_64 rng(29);
  const Network net = random_gaussian_network(3, {6, 4}, 3, 41);
  int accepted = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = random_normal(rng, 3);
    const Linearization lin = affine_coefficients(net, x);
    const Polytope Q = region_polytope(lin);
    // Rejection sampler: shrink the proposal radius until points land inside.
    double radius = 1.0;
    int kept = 0;
    for (int draw = 0; draw < 20000 && kept < 200; ++draw) {
      const Vector z = x + radius * random_normal(rng, 3);
      if (!contains(Q, z, 0.0)) {
        radius = std::max(radius * 0.999, 1e-6);
        continue;
      }
      if (Q.slack(z).minCoeff() <= 1e-9) continue;
      ++kept;
      CHECK(signature_at(net, z) == lin.signature);
      const Vector logits = forward(net, z).logits;
      CHECK((logits - lin.output()(z)).cwiseAbs().maxCoeff() <=
            1e-8 * (1.0 + logits.cwiseAbs().maxCoeff()));
    }
    accepted += kept;
  }
  CHECK(accepted >= 500);
}

TEST_CASE("a network without hidden layers is affine in x") {
  std::mt19937_64 rng(2);
  const Network net({{random_normal(rng, 3, 4), random_normal(rng, 3)}});
  for (int i = 0; i < 20; ++i) {
    const Vector x = random_normal(rng, 4);
    const Vector y = random_normal(rng, 4);
    const double t = 0.37;
    const Vector lhs = forward(net, t * x + (1 - t) * y).logits;
    const Vector rhs = t * forward(net, x).logits + (1 - t) * forward(net, y).logits;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("network construction validates shapes") {
  CHECK_THROWS_AS(Network(std::vector<Layer>{}), DimensionError);
  CHECK_THROWS_AS(Network({{mat({{1, 2}}), vec({0})}, {mat({{1, 2}}), vec({0})}}), DimensionError);
  Matrix bad = mat({{1}});
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS(Network({{bad, vec({0})}}));
}
