#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "wed/error.hpp"
#include "wed/space.hpp"

using namespace wed;

namespace {

std::vector<double> random_point(const SpaceSpec& s, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> x(s.dim());
  for (auto& v : x) v = g(rng);
  if (s.kind() == SpaceSpec::Kind::quantile1d) {
    std::sort(x.begin(), x.end());
    for (std::size_t k = 1; k < x.size(); ++k) x[k] = std::max(x[k], x[k - 1] + 1e-3);
  }
  return x;
}

std::vector<SpaceSpec> all_spaces() {
  return {SpaceSpec::euclidean(3), SpaceSpec::pnorm(3, 1.5), SpaceSpec::pnorm(2, 4.0),
          SpaceSpec::quantile1d(16)};
}

}  // namespace

TEST_CASE("construction invariants") {
  CHECK_THROWS_AS(SpaceSpec::euclidean(0), InvalidInput);
  CHECK_THROWS_AS(SpaceSpec::pnorm(2, 1.0), InvalidInput);
  CHECK_THROWS_AS(SpaceSpec::pnorm(2, std::numeric_limits<double>::infinity()), InvalidInput);
  CHECK_THROWS_AS(SpaceSpec::quantile1d(0), InvalidInput);
  const auto q = SpaceSpec::quantile1d(3);
  CHECK_THROWS_AS(Point(q, {0.0, 0.0, 1.0}), InvalidInput);
  CHECK_THROWS_AS(Point(q, {0.0, 1.0}), InvalidInput);
  CHECK_NOTHROW(Point(q, {0.0, 1e-12, 1.0}));
  CHECK_THROWS_AS(Point(SpaceSpec::euclidean(1), {std::nan("")}), InvalidInput);
  CHECK(q.weight() == doctest::Approx(1.0 / 3));
  CHECK(q.hilbertian());
  CHECK_FALSE(SpaceSpec::pnorm(2, 3.0).hilbertian());
  CHECK(SpaceSpec::euclidean(2).hash() != SpaceSpec::euclidean(3).hash());
}

TEST_CASE("distance basics") {
  const auto e2 = SpaceSpec::euclidean(2);
  CHECK(distance(Point(e2, {0, 0}), Point(e2, {3, 4})) == 5.0);
  for (const auto& s : all_spaces()) {
    std::mt19937_64 rng(1);
    const auto a = random_point(s, rng);
    CHECK(distance(s, a, a) == 0.0);
  }
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0};
  CHECK_THROWS_AS(distance(e2, a, b), InvalidInput);
  CHECK_THROWS_AS(distance(Point(e2, {0, 0}), Point(SpaceSpec::euclidean(1), {0})), InvalidInput);
  // p-norm
  const auto p3 = SpaceSpec::pnorm(2, 3.0);
  CHECK(distance(p3, std::vector<double>{0, 0}, std::vector<double>{1, 1}) ==
        doctest::Approx(std::cbrt(2.0)).epsilon(1e-14));
}

TEST_CASE("W2 between translated Gaussians") {
  const auto q = SpaceSpec::quantile1d(64);
  const double d = distance(gaussian_quantiles(q, 0, 1), gaussian_quantiles(q, 1, 1));
  CHECK(std::abs(d - 1.0) < 1e-3);
  // brute-force quadrature of int (Q0 - Q1)^2 for N(0,1) vs N(0,2): (2-1)^2 = 1
  const auto q2 = SpaceSpec::quantile1d(4096);
  const double d2 = distance(gaussian_quantiles(q2, 0, 1), gaussian_quantiles(q2, 0, 2));
  CHECK(std::abs(d2 - 1.0) < 1e-2);
}

TEST_CASE("normal quantile against Boost") {
  boost::math::normal_distribution<double> nd;
  for (double s : {1e-6, 0.01, 0.2, 0.5, 0.77, 0.999}) {
    CHECK(std::abs(normal_quantile(s) - boost::math::quantile(nd, s)) < 1e-9);
  }
  CHECK_THROWS_AS(normal_quantile(0.0), InvalidInput);
  CHECK_THROWS_AS(normal_quantile(1.0), InvalidInput);
}

TEST_CASE("metric axioms on random triples") {
  for (const auto& s : all_spaces()) {
    std::mt19937_64 rng(42);
    for (int k = 0; k < 1000; ++k) {
      const auto a = random_point(s, rng), b = random_point(s, rng), c = random_point(s, rng);
      const double ab = distance(s, a, b), ba = distance(s, b, a);
      REQUIRE(ab == ba);
      const double ac = distance(s, a, c), cb = distance(s, c, b);
      REQUIRE(ab <= (ac + cb) * (1 + 1e-12));
      REQUIRE(ab >= 0.0);
    }
  }
}

TEST_CASE("geodesics have constant speed") {
  const auto e1 = SpaceSpec::euclidean(1);
  CHECK(geodesic_point(Point(e1, {0}), Point(e1, {2}), 0.25)[0] == 0.5);
  CHECK_THROWS_AS(geodesic_point(Point(e1, {0}), Point(e1, {2}), 1.5), InvalidInput);
  CHECK_THROWS_AS(geodesic_point(Point(e1, {0}), Point(e1, {2}), -0.1), InvalidInput);
  for (const auto& s : all_spaces()) {
    std::mt19937_64 rng(7);
    const auto a = random_point(s, rng), b = random_point(s, rng);
    CHECK(geodesic_point(s, a, b, 0.0) == a);
    CHECK(geodesic_point(s, a, b, 1.0) == b);
    const double dab = distance(s, a, b);
    for (int i = 0; i <= 10; ++i)
      for (int j = 0; j <= 10; ++j) {
        const double si = i / 10.0, tj = j / 10.0;
        const double d = distance(s, geodesic_point(s, a, b, si), geodesic_point(s, a, b, tj));
        REQUIRE(std::abs(d - std::abs(tj - si) * dab) <= 1e-12 * (1 + dab));
      }
    if (s.kind() == SpaceSpec::Kind::quantile1d) {
      CHECK(in_space(s, geodesic_point(s, a, b, 0.37)));
    }
  }
}

TEST_CASE("squared distance gradient and dual norm") {
  for (const auto& s : all_spaces()) {
    std::mt19937_64 rng(3);
    const auto a = random_point(s, rng), b = random_point(s, rng);
    std::vector<double> g(a.size());
    squared_distance_grad(s, a, b, g);
    for (std::size_t k = 0; k < a.size(); ++k) {
      auto ap = a, am = a;
      const double h = 1e-6;
      ap[k] += h;
      am[k] -= h;
      const double fd = (squared_distance(s, ap, b) - squared_distance(s, am, b)) / (2 * h);
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
  // dual norm of a linear functional equals its Lipschitz constant w.r.t. d
  const auto q = SpaceSpec::quantile1d(4);
  const std::vector<double> g{1, 1, 1, 1};
  CHECK(dual_norm(q, g) == doctest::Approx(4.0));  // sqrt(sum g^2 / w) = sqrt(4*4)
  const auto p = SpaceSpec::pnorm(2, 3.0);
  CHECK(dual_norm(p, std::vector<double>{1, 1}) == doctest::Approx(std::pow(2.0, 2.0 / 3.0)));
}
