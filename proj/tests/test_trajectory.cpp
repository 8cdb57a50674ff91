#include <doctest.h>

#include <cmath>
#include <random>

#include "wed/energy.hpp"
#include "wed/error.hpp"
#include "wed/trajectory.hpp"

using namespace wed;

namespace {

Trajectory sampled(const SpaceSpec& s, const TimeGrid& g,
                   const std::function<std::vector<double>(double)>& u) {
  std::vector<double> data;
  for (double t : g.nodes) {
    const auto x = u(t);
    data.insert(data.end(), x.begin(), x.end());
  }
  return Trajectory(s, g, data);
}

const SpaceSpec R1 = SpaceSpec::euclidean(1);
const SpaceSpec R2 = SpaceSpec::euclidean(2);

}  // namespace

TEST_CASE("grids") {
  const auto g = exp_graded_grid(0.1, 2.0, 100);
  CHECK(g.nodes.front() == 0.0);
  CHECK(g.horizon() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(g.nodes[100] == 2.0);
  for (int i = 0; i < 100; ++i) {
    const double ti = -0.1 * std::log1p(-(i / 100.0) * -std::expm1(-20.0));
    REQUIRE(std::abs(g.nodes[i] - ti) <= 1e-12);
  }
  CHECK(uniform_grid(1.0, 4).nodes == std::vector<double>{0, 0.25, 0.5, 0.75, 1.0});
  CHECK_THROWS_AS(uniform_grid(0.0, 4), InvalidInput);
  CHECK_THROWS_AS(uniform_grid(1.0, 0), InvalidInput);
  CHECK_THROWS_AS(exp_graded_grid(-1.0, 1.0, 4), InvalidInput);
  TimeGrid bad{{0.0, 0.5, 0.5}};
  CHECK_THROWS_AS(validate_grid(bad), InvalidInput);
  TimeGrid shifted{{0.1, 0.5}};
  CHECK_THROWS_AS(validate_grid(shifted), InvalidInput);
}

TEST_CASE("exponential weights form a probability measure") {
  for (auto mode : {GridMode::uniform, GridMode::exp_graded}) {
    const auto g = make_grid(mode, 0.05, 1.0, 500);
    const auto w = make_weights(g, 0.05);
    double sum = 0.0;
    for (double m : w.masses) {
      REQUIRE(m > 0.0);
      sum += m;
    }
    CHECK(std::abs(sum + w.tail - 1.0) < 1e-14);
    CHECK(w.tail == doctest::Approx(std::exp(-20.0)));
  }
  const auto g = exp_graded_grid(0.1, 1.0, 10);
  const auto w = make_weights(g, 0.1);
  for (double m : w.masses) CHECK(m == doctest::Approx(w.masses[0]).epsilon(1e-12));
  CHECK_THROWS_AS(make_weights(g, 0.0), InvalidInput);
}

TEST_CASE("trajectory construction") {
  CHECK_THROWS_AS(Trajectory(R1, uniform_grid(1.0, 2), {0.0, 1.0}), InvalidInput);
  const auto q = SpaceSpec::quantile1d(2);
  CHECK_THROWS_AS(Trajectory(q, uniform_grid(1.0, 1), {0.0, 1.0, 1.0, 0.0}), InvalidInput);
}

TEST_CASE("metric speed") {
  const auto c = Trajectory::constant(Point(R2, {1.0, 2.0}), uniform_grid(1.0, 10));
  for (double v : metric_speed(c)) CHECK(v == 0.0);
  CHECK(curve_length(c) == 0.0);
  const auto line = sampled(R1, uniform_grid(1.0, 10), [](double t) { return std::vector<double>{3 * t}; });
  for (double v : metric_speed(line)) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));
  const auto g = uniform_grid(1.0, 1000);
  const auto ex = sampled(R1, g, [](double t) { return std::vector<double>{std::exp(-t)}; });
  const auto v = metric_speed(ex);
  for (int i = 0; i < 1000; ++i) REQUIRE(std::abs(v[i] - std::exp(-g.nodes[i])) < 2e-3);
}

TEST_CASE("geodesic curves have constant speed") {
  for (const auto& s : {SpaceSpec::euclidean(3), SpaceSpec::pnorm(3, 3.0), SpaceSpec::quantile1d(3)}) {
    const std::vector<double> a{0.0, 1.0, 2.0}, b{-1.0, 3.0, 7.0};
    const auto g = uniform_grid(2.0, 64);
    const auto tr = sampled(s, g, [&](double t) { return geodesic_point(s, a, b, t / 2.0); });
    const auto v = metric_speed(tr);
    for (double x : v) REQUIRE(std::abs(x - v[0]) <= 1e-12 * v[0]);
  }
}

TEST_CASE("arclength reparametrization") {
  const auto lin = sampled(R2, uniform_grid(1.0, 100), [](double t) { return std::vector<double>{2 * t, 0.0}; });
  const auto r = arclength_reparam(lin);
  CHECK(r.grid().horizon() == doctest::Approx(2.0).epsilon(1e-14));
  for (double v : metric_speed(r)) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));

  const auto par = sampled(R2, uniform_grid(1.0, 2000), [](double t) { return std::vector<double>{t * t, 0.0}; });
  const auto rp = arclength_reparam(par);
  CHECK(curve_length(rp) == doctest::Approx(curve_length(par)).epsilon(1e-10));
  for (double v : metric_speed(rp)) REQUIRE(std::abs(v - 1.0) < 1e-4);
  CHECK(rp.at(0)[0] == 0.0);
  CHECK(rp.at(rp.cells())[0] == doctest::Approx(1.0).epsilon(1e-14));

  const auto again = arclength_reparam(r);
  for (std::size_t k = 0; k < r.data().size(); ++k) REQUIRE(std::abs(again.data()[k] - r.data()[k]) <= 1e-10);

  const auto c = Trajectory::constant(Point(R1, {1.0}), uniform_grid(1.0, 10));
  CHECK_THROWS_AS(arclength_reparam(c), DegenerateCurve);
}

TEST_CASE("g reparametrization") {
  const auto seg = sampled(R2, uniform_grid(1.0, 200), [](double t) { return std::vector<double>{3 * t, 4 * t}; });
  const ScalarField one = [](std::span<const double>) { return 1.0; };
  const auto a = arclength_reparam(seg);
  const auto b = g_reparam(seg, one);
  for (std::size_t k = 0; k < a.data().size(); ++k) REQUIRE(std::abs(a.data()[k] - b.data()[k]) <= 1e-8);

  const ScalarField two = [](std::span<const double>) { return 2.0; };
  const auto c = g_reparam(seg, two);
  CHECK(c.grid().horizon() == doctest::Approx(2.5).epsilon(1e-12));
  for (double v : metric_speed(c)) CHECK(v == doctest::Approx(2.0).epsilon(1e-10));

  const ScalarField neg = [](std::span<const double> x) { return x[0] - 1.0; };
  CHECK_THROWS_AS(g_reparam(seg, neg), DomainError);
}

TEST_CASE("three-integral identity against a fine oracle") {
  const auto q = make_scalar_quadratic(4.0);
  const ScalarField g = [&](std::span<const double> x) { return std::sqrt(std::max(1.0, energy_eval(q, x))); };
  auto curve = [](int n) {
    return sampled(R1, uniform_grid(1.0, n), [](double t) { return std::vector<double>{-1.0 + 3.0 * t}; });
  };
  const auto coarse = curve(400);
  const auto rp = g_reparam(coarse, g);
  const auto I = reparam_integrals(coarse, rp, g);
  CHECK(I.max_relative_gap() < 1e-3);
  // oracle: int_{-1}^{2} sqrt(max(1, 2x^2)) dx on a 16x finer midpoint rule
  const int n = 400 * 16;
  double oracle = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = -1.0 + 3.0 * (i + 0.5) / n;
    oracle += std::sqrt(std::max(1.0, 2 * x * x)) * 3.0 / n;
  }
  CHECK(std::abs(I.original - oracle) / oracle < 1e-3);
  CHECK(std::abs(I.g_times_speed - oracle) / oracle < 1e-3);
  for (double v : {I.g_squared, I.speed_squared}) CHECK(std::abs(v - oracle) / oracle < 1e-3);
}

TEST_CASE("weighted integration by parts") {
  const auto g0 = exp_graded_grid(0.5, 5.0, 100);
  CHECK(weighted_ibp_check(g0, std::vector<double>(101, 0.0), 0.5) == 0.0);

  auto residual = [](const std::function<double(double)>& w, int N) {
    const auto g = exp_graded_grid(0.5, 5.0, N);
    std::vector<double> ws;
    for (double t : g.nodes) ws.push_back(w(t));
    return weighted_ibp_check(g, ws, 0.5);
  };
  CHECK(residual([](double t) { return t; }, 4000) <= 1e-3);
  const double r1 = residual([](double t) { return std::sin(t); }, 4000);
  const double r2 = residual([](double t) { return std::sin(t); }, 8000);
  CHECK(r1 / r2 >= 1.7);
  CHECK(r1 / r2 <= 2.3);
  CHECK_THROWS_AS(weighted_ibp_check(g0, std::vector<double>(100, 0.0), 0.5), InvalidInput);
}

TEST_CASE("weighted Poincare inequality") {
  const auto g = uniform_grid(2.0, 200);
  const auto zero = spectral_check(g, std::vector<double>(201, 0.0), 0.1);
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);
  CHECK(zero.ratio == 0.0);
  std::vector<double> bad(201, 1.0);
  CHECK_THROWS_AS(spectral_check(g, bad, 0.1), InvalidInput);

  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  int violations = 0;
  for (int s = 0; s < 1000; ++s) {
    const double eps = s % 2 ? 0.1 : 1.0;
    const auto gr = uniform_grid(20 * eps, 200);
    std::vector<double> w(201, 0.0);
    for (int i = 1; i <= 200; ++i) w[i] = w[i - 1] + n01(rng);
    const auto r = spectral_check(gr, w, eps);
    if (r.rhs - r.lhs > 1e-12 * r.lhs) ++violations;
    REQUIRE(r.ratio <= 1.0);
  }
  CHECK(violations == 0);

  // near-extremal family with unit eps; the ratio tends to 1 as n grows
  const int n = 50;
  const auto gw = uniform_grid(4.0 * n, 100000);
  std::vector<double> w;
  for (double t : gw.nodes) w.push_back(std::max(0.0, std::min(1.0, n - std::abs(t - n))) * std::exp(0.5 * t));
  const auto r = spectral_check(gw, w, 1.0);
  CHECK(r.ratio >= 0.9);
  CHECK(r.ratio <= 1.0);
}
