#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "wed/lbfgs.hpp"
#include "wed/value.hpp"

namespace wed {

namespace {

// Minimal action on [0, S] with fixed endpoints, warm-started from `curve`.
// Unless `strict`, a stalled solve still returns its best value, an upper
// bound of the infimum that is good enough for bracketing S.
double inner_action(const SpaceSpec& space, const ScalarField& f, double S,
                    std::vector<double>& curve, int K, const FinslerOptions& opts, bool strict) {
  const int d = space.dim();
  const double h = S / K;
  const std::vector<double> first(curve.begin(), curve.begin() + d);
  const std::vector<double> last(curve.end() - d, curve.end());
  auto node = [&](std::span<const double> z, int i) -> std::span<const double> {
    if (i == 0) return first;
    if (i == K) return last;
    return z.subspan(static_cast<std::size_t>(i - 1) * d, d);
  };
  Objective obj = [&](std::span<const double> z, std::span<double> g) -> double {
    std::fill(g.begin(), g.end(), 0.0);
    std::vector<double> tmp(d), mid(d), probe(d);
    double total = 0.0;
    for (int i = 0; i < K; ++i) {
      auto a = node(z, i), b = node(z, i + 1);
      if (!in_space(space, b)) return std::numeric_limits<double>::infinity();
      total += squared_distance(space, a, b) / (2.0 * h);
      for (int k = 0; k < d; ++k) mid[k] = 0.5 * (a[k] + b[k]);
      const double fm = f(mid);
      total += 0.5 * h * fm * fm;
      // gradient of the kinetic part
      if (i > 0) {
        squared_distance_grad(space, a, b, tmp);
        for (int k = 0; k < d; ++k) g[static_cast<std::size_t>(i - 1) * d + k] += tmp[k] / (2.0 * h);
      }
      if (i + 1 < K) {
        squared_distance_grad(space, b, a, tmp);
        for (int k = 0; k < d; ++k) g[static_cast<std::size_t>(i) * d + k] += tmp[k] / (2.0 * h);
      }
      // central differences of f^2 at the midpoint, split between the endpoints
      for (int k = 0; k < d; ++k) {
        const double step = 1e-6 * std::max(1.0, std::abs(mid[k]));
        probe = mid;
        probe[k] = mid[k] + step;
        const double fp = f(probe);
        probe[k] = mid[k] - step;
        const double fmn = f(probe);
        const double df2 = 0.5 * h * (fp * fp - fmn * fmn) / (2.0 * step);
        if (i > 0) g[static_cast<std::size_t>(i - 1) * d + k] += 0.5 * df2;
        if (i + 1 < K) g[static_cast<std::size_t>(i) * d + k] += 0.5 * df2;
      }
    }
    return total;
  };
  // inverse of the kinetic Hessian (w/h) tridiag(-1, 2, -1), one Thomas sweep per coordinate
  const double scale = (space.hilbertian() ? space.weight() : 1.0) / h;
  const int n = K - 1;
  std::vector<double> cp(n);
  for (int i = 0; i < n; ++i) cp[i] = -1.0 / (2.0 + (i > 0 ? cp[i - 1] : 0.0));
  Preconditioner precond = [&, n](std::span<const double> g, std::span<double> out) {
    for (int k = 0; k < d; ++k) {
      auto at = [&](int i) -> double& { return out[static_cast<std::size_t>(i) * d + k]; };
      for (int i = 0; i < n; ++i) {
        const double denom = 2.0 + (i > 0 ? cp[i - 1] : 0.0);
        at(i) = (g[static_cast<std::size_t>(i) * d + k] / scale + (i > 0 ? at(i - 1) : 0.0)) / denom;
      }
      for (int i = n - 2; i >= 0; --i) at(i) -= cp[i] * at(i + 1);
    }
  };
  std::vector<double> z0(curve.begin() + d, curve.end() - d);
  LbfgsOptions lo;
  lo.grad_tol = opts.grad_tol;
  lo.max_iter = 5000;
  LbfgsResult r = minimize_lbfgs(obj, std::move(z0), lo, precond);
  if (strict && !r.converged && !(r.grad_norm <= 1e-6)) {
    std::ostringstream os;
    os << "Finsler curve optimization failed at S=" << S << ": " << r.message;
    throw NumericError(os.str(), r.trace);
  }
  std::copy(r.x.begin(), r.x.end(), curve.begin() + d);
  return r.f;
}

}  // namespace

FinslerResult finsler_distance(const SpaceSpec& space, const ScalarField& f, const Point& u0,
                               const Point& u1, const FinslerOptions& opts) {
  if (!(u0.space() == space) || !(u1.space() == space))
    throw InvalidInput("Finsler endpoints must belong to the space");
  if (opts.cells < 2) throw InvalidInput("Finsler discretization needs at least two cells");
  const int K = opts.cells;
  const int d = space.dim();
  FinslerResult res;
  res.base_distance = distance(u0, u1);
  std::vector<double> straight;
  double fmax = 0.0;
  for (int i = 0; i <= K; ++i) {
    const auto p = geodesic_point(space, u0.coords(), u1.coords(), static_cast<double>(i) / K);
    const double fv = f(p);
    if (!(fv >= 1.0 - 1e-12)) throw DomainError("Finsler weight must be >= 1");
    fmax = std::max(fmax, fv);
    straight.insert(straight.end(), p.begin(), p.end());
  }
  if (res.base_distance == 0.0) {
    res.curve = straight;
    return res;
  }
  const double lo = 0.1 * res.base_distance;
  const double hi = 10.0 * std::sqrt(fmax) * res.base_distance;
  std::vector<double> warm = straight;
  auto action = [&](double S) { return inner_action(space, f, S, warm, K, opts, false); };
  boost::uintmax_t max_it = 200;
  const int bits = std::max(8, static_cast<int>(-std::log2(opts.S_tol)));
  const auto [S, val] = boost::math::tools::brent_find_minima(action, lo, hi, bits, max_it);
  res.horizon = S;
  res.curve = straight;
  res.distance = inner_action(space, f, S, res.curve, K, opts, true);
  (void)val;

  TimeGrid grid = uniform_grid(S, K);
  Trajectory traj(space, grid, res.curve);
  const Trajectory rep = g_reparam(traj, f);
  res.product_form = reparam_integrals(traj, rep, f).g_times_speed;
  (void)d;
  return res;
}

}  // namespace wed
