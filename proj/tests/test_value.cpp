#include <doctest.h>

#include <atomic>
#include <cmath>

#include <boost/math/special_functions/expint.hpp>

#include "wed/parallel.hpp"
#include "wed/value.hpp"

using namespace wed;

namespace {

const SpaceSpec R1 = SpaceSpec::euclidean(1);
double kappa(double eps) { return (std::sqrt(1 + 4 * eps) - 1) / (4 * eps); }
Point p1(double x) { return Point(R1, {x}); }

ValueOptions uniform_opts(int N) {
  ValueOptions o;
  o.grid_mode = GridMode::uniform;
  o.N = N;
  return o;
}

}  // namespace

TEST_CASE("value function of the quadratic") {
  const auto q = make_scalar_quadratic(1.0);
  for (double eps : {0.2, 0.1, 0.05}) {
    const auto s = value_function(q, R1, p1(1.0), eps);
    CHECK(std::abs(s.V / kappa(eps) - 1) <= 1e-3);
    CHECK(std::abs(2 * eps * s.V * s.V + s.V - 0.5) <= 1e-3);
    CHECK(s.G == doctest::Approx(std::sqrt(2 * (0.5 - s.V) / eps)).epsilon(1e-14));
    CHECK(s.V <= s.phi);
    CHECK(s.solution);
  }
  // V scales like x^2
  const auto a = value_function(q, R1, p1(2.0), 0.1);
  CHECK(std::abs(a.V / (4 * kappa(0.1)) - 1) <= 1e-3);
}

TEST_CASE("value at a global minimizer") {
  const auto dw = make_double_well();
  const auto s = value_function(dw, R1, p1(-1.0), 0.1);
  CHECK(s.V == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(s.G == doctest::Approx(0.0).scale(1.0).epsilon(1e-5));
  CHECK(s.phi == 0.0);
}

TEST_CASE("value below phi everywhere") {
  const auto dw = make_double_well();
  for (double x : {-1.7, -0.4, 0.0, 0.2, 0.9, 1.3}) {
    const auto s = value_function(dw, R1, p1(x), 0.1);
    CHECK(s.V <= s.phi + 1e-8 * (1 + s.phi));
    CHECK(s.V >= -coercivity_bound(dw, R1, s.x.coords()));
  }
}

TEST_CASE("value along the minimizer") {
  const auto q = make_scalar_quadratic(1.0);
  const double eps = 0.1;
  const auto s = value_function(q, R1, p1(1.0), eps, uniform_opts(2500));
  const auto& sol = *s.solution;
  const auto V = value_along(sol);
  CHECK(V[0] == sol.objective);
  const auto& g = sol.trajectory.grid();
  for (int i = 0; i <= g.cells(); ++i) {
    if (i > 0) REQUIRE(V[i] <= V[i - 1] + 1e-15);
    if (g.nodes[i] > 10 * eps) continue;
    const double u = sol.trajectory.at(i)[0];
    REQUIRE(std::abs(V[i] / (kappa(eps) * u * u) - 1) <= 1e-3);
  }
  for (int k : {250, 500, 1000}) {
    const auto fresh = value_function(q, R1, sol.trajectory.point(k), eps);
    CHECK(std::abs(fresh.V / V[k] - 1) <= 5e-3);
  }
}

TEST_CASE("dynamic programming") {
  const auto q = make_scalar_quadratic(1.0);
  ValueCache cache;
  const auto s = value_function(q, R1, p1(1.0), 0.1, {}, &cache);
  const auto zero = check_dpp(s, q, {0.0}, {}, &cache);
  CHECK(zero.max_residual == 0.0);
  const auto r = check_dpp(s, q, {0.1, 0.2, 0.5}, {}, &cache);
  CHECK(r.pass);
  CHECK(r.max_residual <= 5e-3);

  const auto dw = make_double_well();
  const auto d = value_function(dw, R1, p1(0.3), 0.05, {}, &cache);
  const auto rd = check_dpp(d, dw, {0.05, 0.1, 0.25}, {}, &cache);
  CHECK(rd.pass);
  CHECK_THROWS_AS(check_dpp(d, dw, {-0.1}, {}, &cache), InvalidInput);
}

TEST_CASE("fundamental identity") {
  const auto dw = make_double_well();
  WedProblem c{0.1, 2.5, 300, GridMode::uniform, R1, dw, p1(1.0)};
  const auto rc = check_fundamental_identity(minimize_wed(c), dw);
  CHECK(rc.max_residual <= 1e-12);

  const auto q = make_scalar_quadratic(1.0);
  double prev = 0.0;
  for (int N : {4000, 8000}) {
    const Horizon h = resolve_horizon(2.0, N, 0.1, GridMode::uniform);
    WedProblem p{0.1, h.T, h.N, GridMode::uniform, R1, q, p1(1.0)};
    const auto r = check_fundamental_identity(minimize_wed(p), q);
    CHECK(r.pass);
    CHECK(r.max_residual <= 5e-2);
    CHECK(r.detail("energy_identity") <= 5e-2);
    if (prev > 0) {
      CHECK(prev / r.max_residual >= 1.54);
      CHECK(prev / r.max_residual <= 2.86);
    }
    prev = r.max_residual;
  }
}

TEST_CASE("eps monotonicity") {
  double prev = 0.0;
  for (double eps : {0.4, 0.2, 0.1, 0.05, 0.025, 1e-4}) {
    CHECK(kappa(eps) > prev);
    prev = kappa(eps);
  }
  CHECK(std::abs(kappa(1e-6) - 0.5) < 1e-5);

  const auto q = make_scalar_quadratic(1.0);
  for (double eps : {0.2, 0.1, 0.05, 0.025})
    CHECK(std::abs(value_function(q, R1, p1(1.0), eps).V / kappa(eps) - 1) <= 1e-3);

  const auto dw = make_double_well();
  std::vector<Point> xs;
  for (int k = 0; k < 20; ++k) xs.push_back(p1(-1.9 + 3.8 * k / 19));
  ValueCache cache;
  const auto r = check_eps_monotonicity(dw, R1, xs, {0.2, 0.1, 0.05, 0.025}, {}, &cache);
  CHECK(r.pass);
  CHECK(r.max_residual <= 1e-6);
  CHECK_THROWS_AS(check_eps_monotonicity(dw, R1, xs, {0.1, 0.2}, {}, &cache), InvalidInput);

  // phi - V_eps >= 0 and shrinks to 0
  double gap_prev = 1e300;
  for (double eps : {0.2, 0.1, 0.05, 0.025, 0.0125}) {
    const auto s = value_function(dw, R1, p1(0.3), eps, {}, &cache);
    const double gap = s.phi - s.V;
    CHECK(gap >= 0.0);
    CHECK(gap < gap_prev);
    gap_prev = gap;
  }
  CHECK(gap_prev < 2e-3);
}

TEST_CASE("Yosida lower bound") {
  const auto q = make_scalar_quadratic(1.0);
  const double eps = 0.1;
  const auto r = check_yosida_bound(q, R1, p1(1.0), eps);
  // oracle: int_0^inf 1/(2(1+t)) dmu_eps = e^{1/eps} E1(1/eps) / (2 eps)
  const double oracle = std::exp(1 / eps) * boost::math::expint(1, 1 / eps) / (2 * eps);
  CHECK(std::abs(r.detail("rhs") - oracle) < 1e-5);
  const auto fine = check_yosida_bound(q, R1, p1(1.0), eps, {}, 20000);
  CHECK(std::abs(fine.detail("rhs") - oracle) < 1e-6);
  // trapezoid oracle at 1e5 points in t on [0, 40 eps]
  const int M = 100000;
  const double Tq = 40 * eps;
  double trap = 0.0;
  for (int j = 0; j <= M; ++j) {
    const double t = Tq * j / M;
    const double f = 1 / (2 * (1 + t)) * std::exp(-t / eps) / eps;
    trap += (j == 0 || j == M ? 0.5 : 1.0) * f * Tq / M;
  }
  CHECK(std::abs(trap - oracle) < 1e-6);
  CHECK(r.pass);
  CHECK(r.detail("margin") > 0.0);
  CHECK(r.detail("margin") == doctest::Approx(kappa(eps) - oracle).epsilon(1e-2));

  const auto z = check_yosida_bound(q, R1, p1(0.0), eps);
  CHECK(z.detail("V") == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(z.detail("rhs") == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));

  const auto dw = make_double_well();
  const auto d = check_yosida_bound(dw, R1, p1(0.3), 0.05);
  CHECK(d.pass);
  CHECK(d.detail("margin") > 0.0);
  CHECK(d.detail("horizon") < 0.5);
  CHECK_THROWS_AS(check_yosida_bound(dw, R1, p1(0.3), 0.05, {}, 0), InvalidInput);
}

TEST_CASE("proto-slope against the local slope") {
  const auto q = make_scalar_quadratic(1.0);
  const double eps = 0.1;
  const auto s = value_function(q, R1, p1(1.0), eps);
  const double rm = (1 - std::sqrt(1 + 4 * eps)) / (2 * eps);
  // V to 1e-3 relative moves G by at most 1e-3 kappa / (eps G)
  CHECK(std::abs(s.G - std::abs(rm)) < 1e-3 * 0.46 / (eps * 0.9));
  CHECK(s.G <= 1.0);

  const auto dw = make_double_well();
  const auto crit = wed_slope_compare(dw, R1, p1(1.0), {0.1, 0.05});
  CHECK(crit.detail("slope") == 0.0);
  CHECK(crit.pass);

  const auto r = wed_slope_compare(dw, R1, p1(0.5), {0.2, 0.1, 0.05, 0.025, 0.0125});
  CHECK(r.pass);
  CHECK(r.detail("slope") == doctest::Approx(0.375));
  CHECK(r.detail("final_gap") <= 5e-2);
  CHECK(r.detail("G_eps_0.0125") <= 0.375 + 1e-2);
}

TEST_CASE("Hamilton-Jacobi identity") {
  const auto q = make_scalar_quadratic(1.0);
  const auto r = check_hj(q, R1, p1(1.0), 0.1);
  CHECK(r.pass);
  CHECK(r.residuals.front() <= 1e-2);
  // |dV|(x) = 2 kappa |x|
  CHECK(r.detail("probe_slope") == doctest::Approx(2 * kappa(0.1)).epsilon(1e-2));

  const auto c = check_hj(q, R1, p1(0.0), 0.1);
  CHECK(c.detail("G") == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(c.detail("probe_slope") == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));

  const auto cq = check_hj(make_convex_quartic(), R1, p1(1.0), 0.05);
  CHECK(cq.pass);
  CHECK(cq.residuals.front() <= 5e-2);

  ProbeOptions bad;
  bad.levels = 0;
  CHECK_THROWS_AS(check_hj(q, R1, p1(1.0), 0.1, bad), InvalidInput);
}

TEST_CASE("slope probe in two dimensions uses seeded directions") {
  Eigen::MatrixXd A(2, 2);
  A << 2, 0, 0, 1;
  const auto q = make_quadratic(A, Eigen::VectorXd::Zero(2));
  const auto R2 = SpaceSpec::euclidean(2);
  const Point x(R2, {0.6, 0.8});
  ProbeOptions po;
  const auto a = probe_value_slope(q, R2, x, 0.05, po, {});
  const auto b = probe_value_slope(q, R2, x, 0.05, po, {});
  CHECK(a.estimate == b.estimate);
  const auto s = value_function(q, R2, x, 0.05);
  CHECK(std::abs(a.estimate - s.G) / s.G < 5e-2);
}

TEST_CASE("Finsler distance") {
  const auto R2 = SpaceSpec::euclidean(2);
  const ScalarField one = [](std::span<const double>) { return 1.0; };
  const auto e = finsler_distance(R2, one, Point(R2, {0, 0}), Point(R2, {3, 4}));
  CHECK(std::abs(e.distance - 5.0) < 1e-6);
  CHECK(e.base_distance == 5.0);

  // constant weight: brute force over the free horizon of straight curves
  const double c = 2.5;
  const ScalarField fc = [c](std::span<const double>) { return std::sqrt(c); };
  const auto r = finsler_distance(R1, fc, p1(-0.5), p1(1.0));
  double brute = 1e300;
  for (int k = 1; k <= 200000; ++k) {
    const double S = 3.0 * k / 200000;
    brute = std::min(brute, 0.5 * S * (1.5 * 1.5 / (S * S) + c));
  }
  CHECK(std::abs(r.distance - brute) < 1e-4);
  CHECK(std::abs(r.distance - std::sqrt(c) * 1.5) < 1e-4);

  const auto w = finsler_weight(make_scalar_quadratic(4.0));
  const auto rq = finsler_distance(R1, w, p1(-1.0), p1(2.0));
  CHECK(rq.distance >= rq.base_distance);
  CHECK(std::abs(rq.product_form - rq.distance) / rq.distance <= 1e-3);

  const ScalarField small = [](std::span<const double>) { return 0.5; };
  CHECK_THROWS_AS(finsler_distance(R1, small, p1(0.0), p1(1.0)), DomainError);
}

TEST_CASE("value cache") {
  const auto q = make_scalar_quadratic(1.0);
  ValueCache cache(2);
  const auto a = value_function(q, R1, p1(1.0), 0.1, {}, &cache);
  CHECK(cache.misses() == 1);
  const auto b = value_function(q, R1, p1(1.0 + 1e-14), 0.1, {}, &cache);
  CHECK(cache.hits() == 1);
  CHECK(a.V == b.V);
  value_function(q, R1, p1(0.5), 0.1, {}, &cache);
  value_function(q, R1, p1(0.25), 0.1, {}, &cache);
  CHECK(cache.size() == 2);
  // least recently used entry (x = 1) was evicted
  value_function(q, R1, p1(1.0), 0.1, {}, &cache);
  CHECK(cache.hits() == 1);
  // different options are different keys
  const auto k1 = ValueCache::make_key(q, R1, std::vector<double>{1.0}, 0.1, {});
  const auto k2 = ValueCache::make_key(q, R1, std::vector<double>{1.0}, 0.1, uniform_opts(1000));
  CHECK_FALSE(k1 == k2);
  // insert-if-absent
  ValueCache c2;
  auto first = std::make_shared<const ValueSample>(a);
  auto second = std::make_shared<const ValueSample>(b);
  CHECK(c2.insert(k1, first) == first);
  CHECK(c2.insert(k1, second) == first);
}

TEST_CASE("ordered parallel map") {
  std::vector<int> items(100);
  for (int i = 0; i < 100; ++i) items[i] = i;
  const auto out = ordered_parallel_map(items, 4, [](int i) { return i * i; });
  for (int i = 0; i < 100; ++i) CHECK(out[i] == i * i);
  CHECK_THROWS_AS(ordered_parallel_map(items, 3,
                                       [](int i) -> int {
                                         if (i == 7) throw InvalidInput("seven");
                                         return i;
                                       }),
                  InvalidInput);
  // parallel value sweeps match serial ones bit for bit
  const auto dw = make_double_well();
  ValueOptions par;
  par.jobs = 3;
  std::vector<Point> xs{p1(0.1), p1(0.4), p1(1.2)};
  const auto r1 = check_eps_monotonicity(dw, R1, xs, {0.1, 0.05}, {}, nullptr);
  const auto r2 = check_eps_monotonicity(dw, R1, xs, {0.1, 0.05}, par, nullptr);
  CHECK(r1.residuals == r2.residuals);
}
