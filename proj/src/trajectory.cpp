#include "wed/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "wed/error.hpp"

namespace wed {

TimeGrid uniform_grid(double T, int N) {
  if (!(T > 0.0) || N < 1) throw InvalidInput("uniform_grid needs T > 0 and N >= 1");
  TimeGrid grid{std::vector<double>(N + 1), GridMode::uniform};
  for (int i = 0; i <= N; ++i) grid.nodes[i] = T * i / N;
  grid.nodes[N] = T;
  return grid;
}

TimeGrid exp_graded_grid(double eps, double T, int N) {
  if (!(eps > 0.0) || !(T > 0.0) || N < 1) {
    throw InvalidInput("exp_graded_grid needs eps > 0, T > 0, N >= 1");
  }
  TimeGrid grid{std::vector<double>(N + 1), GridMode::exp_graded};
  const double total = -std::expm1(-T / eps);
  for (int i = 0; i <= N; ++i) {
    grid.nodes[i] = -eps * std::log1p(-(static_cast<double>(i) / N) * total);
  }
  grid.nodes[0] = 0.0;
  grid.nodes[N] = T;
  validate_grid(grid);
  return grid;
}

TimeGrid make_grid(GridMode mode, double eps, double T, int N) {
  return mode == GridMode::uniform ? uniform_grid(T, N) : exp_graded_grid(eps, T, N);
}

void validate_grid(const TimeGrid& grid) {
  if (grid.nodes.size() < 2) throw InvalidInput("time grid needs at least one cell");
  if (grid.nodes.front() != 0.0) throw InvalidInput("time grid must start at 0");
  for (std::size_t i = 1; i < grid.nodes.size(); ++i) {
    if (!(grid.nodes[i] > grid.nodes[i - 1])) {
      throw InvalidInput("time grid must be strictly increasing");
    }
  }
}

Weights make_weights(const TimeGrid& grid, double eps) {
  if (!(eps > 0.0)) throw InvalidInput("make_weights needs eps > 0");
  validate_grid(grid);
  Weights w;
  w.epsilon = eps;
  w.masses.resize(grid.cells());
  for (int i = 0; i < grid.cells(); ++i) {
    w.masses[i] = std::exp(-grid.nodes[i] / eps) * -std::expm1(-grid.step(i) / eps);
  }
  w.tail = std::exp(-grid.horizon() / eps);
  return w;
}

Trajectory::Trajectory(SpaceSpec space, TimeGrid grid, std::vector<double> data)
    : space_(space), grid_(std::move(grid)), data_(std::move(data)) {
  validate_grid(grid_);
  const std::size_t expected = grid_.nodes.size() * static_cast<std::size_t>(space_.dim());
  if (data_.size() != expected) {
    throw InvalidInput("trajectory has " + std::to_string(data_.size()) +
                       " values, expected " + std::to_string(expected));
  }
  for (int i = 0; i <= cells(); ++i) {
    if (!in_space(space_, at(i))) {
      throw InvalidInput("trajectory node " + std::to_string(i) + " is not a point of " +
                         space_.name());
    }
  }
}

Trajectory Trajectory::constant(const Point& x, TimeGrid grid) {
  std::vector<double> data;
  data.reserve(grid.nodes.size() * x.size());
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    data.insert(data.end(), x.vec().begin(), x.vec().end());
  }
  return Trajectory(x.space(), std::move(grid), std::move(data));
}

std::vector<double> metric_speed(const Trajectory& traj) {
  std::vector<double> v(traj.cells());
  for (int i = 0; i < traj.cells(); ++i) {
    v[i] = distance(traj.space(), traj.at(i), traj.at(i + 1)) / traj.grid().step(i);
  }
  return v;
}

double curve_length(const Trajectory& traj) {
  double L = 0.0;
  for (int i = 0; i < traj.cells(); ++i) {
    L += distance(traj.space(), traj.at(i), traj.at(i + 1));
  }
  return L;
}

namespace {

// Resamples a polyline whose nodes sit at cumulative parameters `cum`
// (nondecreasing, cum[0] = 0) onto a uniform grid of the same size. Flat
// stretches map to their left-most preimage.
Trajectory resample(const Trajectory& traj, const std::vector<double>& cum) {
  const int N = traj.cells();
  const double total = cum.back();
  TimeGrid grid = uniform_grid(total, N);
  const auto d = static_cast<std::size_t>(traj.dim());
  std::vector<double> data(static_cast<std::size_t>(N + 1) * d);
  std::copy(traj.at(0).begin(), traj.at(0).end(), data.begin());
  std::copy(traj.at(N).begin(), traj.at(N).end(), data.begin() + N * d);
  int cell = 0;
  for (int j = 1; j < N; ++j) {
    const double s = grid.nodes[j];
    while (cell < N - 1 && cum[cell + 1] < s) ++cell;
    const double width = cum[cell + 1] - cum[cell];
    const double theta = width > 0.0 ? std::clamp((s - cum[cell]) / width, 0.0, 1.0) : 0.0;
    auto p = geodesic_point(traj.space(), traj.at(cell), traj.at(cell + 1), theta);
    std::copy(p.begin(), p.end(), data.begin() + j * d);
  }
  return Trajectory(traj.space(), std::move(grid), std::move(data));
}

double field_at_midpoint(const Trajectory& traj, const ScalarField& g, int i) {
  return g(geodesic_point(traj.space(), traj.at(i), traj.at(i + 1), 0.5));
}

}  // namespace

Trajectory arclength_reparam(const Trajectory& traj) {
  std::vector<double> cum(traj.cells() + 1, 0.0);
  for (int i = 0; i < traj.cells(); ++i) {
    cum[i + 1] = cum[i] + distance(traj.space(), traj.at(i), traj.at(i + 1));
  }
  if (!(cum.back() > 0.0)) throw DegenerateCurve("arclength_reparam: zero-length curve");
  return resample(traj, cum);
}

Trajectory g_reparam(const Trajectory& traj, const ScalarField& g) {
  std::vector<double> cum(traj.cells() + 1, 0.0);
  for (int i = 0; i < traj.cells(); ++i) {
    const double gi = field_at_midpoint(traj, g, i);
    if (!(gi > 0.0) || !std::isfinite(gi)) {
      throw DomainError("g_reparam: g must be positive and finite along the curve");
    }
    cum[i + 1] = cum[i] + distance(traj.space(), traj.at(i), traj.at(i + 1)) / gi;
  }
  if (!(cum.back() > 0.0)) throw DegenerateCurve("g_reparam: zero-length curve");
  return resample(traj, cum);
}

double ReparamIntegrals::max_relative_gap() const {
  const double vals[4] = {g_squared, speed_squared, g_times_speed, original};
  const double hi = *std::max_element(vals, vals + 4);
  const double lo = *std::min_element(vals, vals + 4);
  return hi > 0.0 ? (hi - lo) / hi : 0.0;
}

ReparamIntegrals reparam_integrals(const Trajectory& original,
                                   const Trajectory& reparametrized,
                                   const ScalarField& g) {
  ReparamIntegrals r;
  const auto speed = metric_speed(reparametrized);
  for (int j = 0; j < reparametrized.cells(); ++j) {
    const double ds = reparametrized.grid().step(j);
    const double gj = field_at_midpoint(reparametrized, g, j);
    r.g_squared += gj * gj * ds;
    r.speed_squared += speed[j] * speed[j] * ds;
    r.g_times_speed += gj * speed[j] * ds;
  }
  for (int i = 0; i < original.cells(); ++i) {
    r.original += field_at_midpoint(original, g, i) *
                  distance(original.space(), original.at(i), original.at(i + 1));
  }
  return r;
}

double weighted_ibp_check(const TimeGrid& grid, std::span<const double> w, double eps) {
  if (w.size() != grid.nodes.size()) throw InvalidInput("weighted_ibp_check: size mismatch");
  const Weights weights = make_weights(grid, eps);
  double lhs = w[0];
  double rhs = w.back() * weights.tail;
  for (int i = 0; i < grid.cells(); ++i) {
    const double slope = (w[i + 1] - w[i]) / grid.step(i);
    lhs += eps * slope * weights.masses[i];
    rhs += w[i] * weights.masses[i];
  }
  return std::abs(lhs - rhs);
}

SpectralResult spectral_check(const TimeGrid& grid, std::span<const double> w, double eps) {
  if (w.size() != grid.nodes.size()) throw InvalidInput("spectral_check: size mismatch");
  if (w[0] != 0.0) throw InvalidInput("spectral_check: w(0) must vanish");
  if (!(eps > 0.0)) throw InvalidInput("spectral_check: eps must be positive");
  validate_grid(grid);
  SpectralResult r;
  double w2 = 0.0;
  for (int i = 0; i < grid.cells(); ++i) {
    const double h = grid.step(i);
    const double x = h / eps;
    const double slope = (w[i + 1] - w[i]) / h;
    const double start = std::exp(-grid.nodes[i] / eps);
    // int_0^h tau^n exp(-tau/eps)/eps dtau = eps^n n! P(n+1, h/eps)
    const double m0 = -std::expm1(-x);
    const double m1 = eps * boost::math::gamma_p(2.0, x);
    const double m2 = 2.0 * eps * eps * boost::math::gamma_p(3.0, x);
    r.lhs += slope * slope * start * m0;
    w2 += start * (w[i] * w[i] * m0 + 2.0 * w[i] * slope * m1 + slope * slope * m2);
  }
  r.rhs = w2 / (4.0 * eps * eps);
  r.ratio = r.lhs > 0.0 ? r.rhs / r.lhs : 0.0;
  return r;
}

}  // namespace wed
