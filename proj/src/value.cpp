#include "wed/value.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/container_hash/hash.hpp>

#include "wed/parallel.hpp"

namespace wed {

std::size_t ValueOptions::hash() const {
  std::size_t h = 0;
  boost::hash_combine(h, horizon_factor);
  boost::hash_combine(h, N);
  boost::hash_combine(h, static_cast<int>(grid_mode));
  boost::hash_combine(h, static_cast<int>(solver));
  boost::hash_combine(h, grad_tol);
  boost::hash_combine(h, max_iter);
  boost::hash_combine(h, static_cast<int>(preconditioning));
  return h;
}

ValueCache::Key ValueCache::make_key(const EnergySpec& e, const SpaceSpec& s,
                                     std::span<const double> x, double eps,
                                     const ValueOptions& opts) {
  Key k{e.hash(), s.hash(), opts.hash(), std::bit_cast<std::uint64_t>(eps), {}};
  k.x.reserve(x.size());
  for (double v : x) k.x.push_back(std::llround(v * 1e12));
  return k;
}

std::shared_ptr<const ValueSample> ValueCache::find(const Key& key) {
  std::lock_guard lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) {
    ++misses_;
    return nullptr;
  }
  ++hits_;
  order_.splice(order_.begin(), order_, it->second);
  return it->second->second;
}

std::shared_ptr<const ValueSample> ValueCache::insert(const Key& key,
                                                      std::shared_ptr<const ValueSample> value) {
  std::lock_guard lock(mu_);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second->second;
  if (capacity_ == 0) return value;
  order_.emplace_front(key, std::move(value));
  index_.emplace(key, order_.begin());
  while (order_.size() > capacity_) {
    index_.erase(order_.back().first);
    order_.pop_back();
  }
  return order_.front().second;
}

std::size_t ValueCache::size() const {
  std::lock_guard lock(mu_);
  return order_.size();
}

WedProblem value_problem(const EnergySpec& energy, const SpaceSpec& space, const Point& x,
                         double eps, const ValueOptions& opts) {
  if (!(opts.horizon_factor > 0.0)) throw InvalidInput("horizon_factor must be positive");
  WedProblem pb{eps, opts.horizon_factor * eps, opts.N, opts.grid_mode, space, energy, x};
  pb.solver = opts.solver;
  pb.grad_tol = opts.grad_tol;
  pb.max_iter = opts.max_iter;
  pb.preconditioning = opts.preconditioning;
  return pb;
}

ValueSample value_function(const EnergySpec& energy, const SpaceSpec& space, const Point& x,
                           double eps, const ValueOptions& opts, ValueCache* cache) {
  std::optional<ValueCache::Key> key;
  if (cache) {
    key = ValueCache::make_key(energy, space, x.coords(), eps, opts);
    if (auto hit = cache->find(*key)) return *hit;
  }
  const WedProblem pb = value_problem(energy, space, x, eps, opts);
  auto sol = std::make_shared<const WedSolution>(solve(pb));
  ValueSample s{x, eps, sol->objective, 0.0, energy_eval(energy, x), sol};
  const double slack = 1e-8 * (1.0 + std::abs(s.phi));
  const double lower = -coercivity_bound(energy, space, x.coords());
  if (s.V > s.phi + slack || s.V < lower - slack) {
    std::ostringstream os;
    os << "value sample violates phi(x) >= V >= -Q(x): phi=" << s.phi << " V=" << s.V
       << " -Q=" << lower;
    throw NumericError(os.str());
  }
  s.G = std::sqrt(2.0 * std::max(0.0, s.phi - s.V) / eps);
  if (cache) return *cache->insert(*key, std::make_shared<const ValueSample>(s));
  return s;
}

std::vector<double> value_along(const WedSolution& sol) {
  const int N = sol.trajectory.cells();
  const double eps = sol.epsilon;
  std::vector<double> V(N + 1);
  V[N] = sol.phi[N];
  for (int i = N - 1; i >= 0; --i) {
    const double dt = sol.trajectory.grid().step(i);
    const double a = -std::expm1(-dt / eps);
    const double l = 0.5 * eps * sol.speed[i] * sol.speed[i] + sol.phi[i];
    V[i] = a * l + (1.0 - a) * V[i + 1];
  }
  V[0] = sol.objective;
  return V;
}

void IdentityReport::finish() {
  max_residual = 0.0;
  for (double r : residuals) {
    if (std::isnan(r)) {
      max_residual = std::numeric_limits<double>::infinity();
      break;
    }
    max_residual = std::max(max_residual, r);
  }
  pass = max_residual <= tolerance;
}

double IdentityReport::detail(const std::string& key) const {
  for (const auto& [k, v] : details)
    if (k == key) return v;
  throw InvalidInput("report has no detail named " + key);
}

namespace {

double running_cost(const WedSolution& sol, int i) {
  return 0.5 * sol.epsilon * sol.speed[i] * sol.speed[i] + sol.phi[i];
}

int nearest_node(const TimeGrid& grid, double t) {
  auto it = std::lower_bound(grid.nodes.begin(), grid.nodes.end(), t);
  if (it == grid.nodes.end()) return grid.cells();
  int k = static_cast<int>(it - grid.nodes.begin());
  if (k > 0 && t - grid.nodes[k - 1] < grid.nodes[k] - t) --k;
  return k;
}

std::string fmt(const std::string& prefix, double v) {
  std::ostringstream os;
  os << prefix << v;
  return os.str();
}

}  // namespace

IdentityReport check_dpp(const ValueSample& sample, const EnergySpec& energy,
                         const std::vector<double>& horizons, const ValueOptions& opts,
                         ValueCache* cache, double tolerance) {
  if (!sample.solution) throw InvalidInput("check_dpp needs a sample with its solution");
  const WedSolution& sol = *sample.solution;
  const TimeGrid& grid = sol.trajectory.grid();
  const double eps = sol.epsilon;
  const std::vector<double> along = value_along(sol);
  const double scale = std::max(std::abs(sample.V), 1e-14 * (1.0 + std::abs(sample.phi)));
  IdentityReport rep{"dpp"};
  rep.tolerance = tolerance;
  std::vector<int> nodes;
  for (double Tp : horizons) {
    if (!(Tp >= 0.0) || Tp > grid.horizon()) throw InvalidInput("DPP horizon outside [0, T]");
    nodes.push_back(nearest_node(grid, Tp));
  }
  auto fresh = ordered_parallel_map(nodes, opts.jobs, [&](int k) {
    return value_function(energy, sol.trajectory.space(), sol.trajectory.point(k), eps, opts,
                          cache).V;
  });
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const int k = nodes[j];
    double partial = 0.0;
    for (int i = 0; i < k; ++i) partial += sol.weights.masses[i] * running_cost(sol, i);
    const double w = std::exp(-grid.nodes[k] / eps);
    const double r = std::abs(sample.V - (partial + w * fresh[j])) / scale;
    const double r_along = std::abs(sample.V - (partial + w * along[k])) / scale;
    rep.residuals.push_back(r);
    rep.details.emplace_back(fmt("t_", grid.nodes[k]), r);
    rep.details.emplace_back(fmt("along_t_", grid.nodes[k]), r_along);
  }
  rep.finish();
  return rep;
}

IdentityReport check_fundamental_identity(const WedSolution& sol, const EnergySpec& energy,
                                          double tolerance) {
  (void)energy;
  const Trajectory& tr = sol.trajectory;
  const int N = tr.cells();
  const double eps = sol.epsilon;
  const TimeGrid& grid = tr.grid();
  const double T = grid.horizon();
  const std::vector<double> V = value_along(sol);
  const double c = 0.5 * eps * sol.speed[N - 1] * sol.speed[N - 1];

  std::vector<double> rhs(N), d(N), vabs(N), en(N);
  double scale = 0.0, phimax = 0.0, dissipation = 0.0;
  for (int i = 0; i < N; ++i) {
    const double v2 = sol.speed[i] * sol.speed[i];
    rhs[i] = 0.5 * v2 + (sol.phi[i] - V[i]) / eps;
    d[i] = -(V[i + 1] - V[i]) / grid.step(i) - rhs[i];
    vabs[i] = (V[i] - (sol.phi[i] - 0.5 * eps * v2 + c * std::exp((grid.nodes[i] - T) / eps))) / eps;
    en[i] = V[i] - V[0] + dissipation - c * (std::exp((grid.nodes[i] - T) / eps) - std::exp(-T / eps));
    dissipation += v2 * grid.step(i);
    scale = std::max(scale, std::abs(rhs[i]));
    phimax = std::max(phimax, std::abs(sol.phi[i]));
  }
  scale = std::max(scale, 1e-14 * (1.0 + phimax) / eps);
  const double en_scale = std::max(dissipation, 1e-14 * (1.0 + phimax));
  IdentityReport rep{"fundamental"};
  rep.tolerance = tolerance;
  rep.residuals.resize(N);
  double md = 0.0, mv = 0.0, me = 0.0;
  for (int i = 0; i < N; ++i) {
    const double a = std::abs(d[i]) / scale, b = std::abs(vabs[i]) / scale,
                 e = std::abs(en[i]) / en_scale;
    md = std::max(md, a);
    mv = std::max(mv, b);
    me = std::max(me, e);
    rep.residuals[i] = std::max({a, b, e});
  }
  rep.details = {{"derivative", md}, {"vabs", mv}, {"energy_identity", me}, {"rhs_scale", scale}};
  rep.finish();
  return rep;
}

IdentityReport check_eps_monotonicity(const EnergySpec& energy, const SpaceSpec& space,
                                      const std::vector<Point>& xs,
                                      const std::vector<double>& eps_list,
                                      const ValueOptions& opts, ValueCache* cache,
                                      double tolerance) {
  if (eps_list.empty() || xs.empty()) throw InvalidInput("monotonicity check needs points and eps values");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1])) throw InvalidInput("eps list must be strictly decreasing");
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t k = 0; k < eps_list.size(); ++k) jobs.emplace_back(i, k);
  auto samples = ordered_parallel_map(jobs, opts.jobs, [&](const auto& ik) {
    return value_function(energy, space, xs[ik.first], eps_list[ik.second], opts, cache);
  });
  IdentityReport rep{"monotone"};
  rep.tolerance = tolerance;
  double max_gap_first = 0.0, max_gap_last = 0.0;
  const std::size_t K = eps_list.size();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const ValueSample& s = samples[i * K + k];
      rep.residuals.push_back(std::max(0.0, s.V - s.phi));
      if (k > 0) rep.residuals.push_back(std::max(0.0, samples[i * K + k - 1].V - s.V));
    }
    max_gap_first = std::max(max_gap_first, samples[i * K].phi - samples[i * K].V);
    max_gap_last = std::max(max_gap_last, samples[i * K + K - 1].phi - samples[i * K + K - 1].V);
  }
  rep.details = {{"max_gap_largest_eps", max_gap_first}, {"max_gap_smallest_eps", max_gap_last}};
  rep.finish();
  return rep;
}

IdentityReport check_yosida_bound(const EnergySpec& energy, const SpaceSpec& space,
                                  const Point& x, double eps, const ValueOptions& opts,
                                  int quadrature_points, ValueCache* cache, double tolerance) {
  if (quadrature_points < 1) throw InvalidInput("quadrature_points must be positive");
  const ValueSample s = value_function(energy, space, x, eps, opts, cache);
  double T = std::numeric_limits<double>::infinity();
  const double B = energy.coercivity.B;
  if (B > 0.0) T = 1.0 / (4.0 * B);
  if (energy.lambda && *energy.lambda < 0.0) T = std::min(T, (1.0 - 1e-3) / (2.0 * -*energy.lambda));
  const double smax = std::isfinite(T) ? -std::expm1(-T / eps) : 1.0;
  const int M = quadrature_points;
  std::vector<double> ts(M);
  for (int j = 0; j < M; ++j) ts[j] = -eps * std::log1p(-(j + 0.5) * smax / M);
  auto vals = ordered_parallel_map(ts, opts.jobs, [&](double t) {
    return yosida(energy, space, x.coords(), t).value;
  });
  double rhs = 0.0;
  for (double v : vals) rhs += v;
  rhs *= smax / M;
  double correction = 0.0;
  if (std::isfinite(T)) correction = 2.0 * coercivity_bound(energy, space, x.coords()) * std::exp(-T / eps);
  rhs -= correction;
  IdentityReport rep{"yosida"};
  rep.tolerance = tolerance;
  rep.residuals = {std::max(0.0, rhs - s.V)};
  rep.details = {{"V", s.V}, {"rhs", rhs}, {"margin", s.V - rhs}, {"horizon", T},
                 {"tail_correction", correction}};
  rep.finish();
  return rep;
}

IdentityReport wed_slope_compare(const EnergySpec& energy, const SpaceSpec& space,
                                 const Point& x, const std::vector<double>& eps_list,
                                 const ValueOptions& opts, ValueCache* cache, double upper_tol,
                                 double final_tol) {
  if (eps_list.empty()) throw InvalidInput("slope comparison needs eps values");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1])) throw InvalidInput("eps list must be strictly decreasing");
  const double slope = local_slope(energy, space, x.coords(), SlopeMethod::analytic).value;
  auto samples = ordered_parallel_map(eps_list, opts.jobs, [&](double eps) {
    return value_function(energy, space, x, eps, opts, cache);
  });
  IdentityReport rep{"wed_slope"};
  rep.tolerance = 1.0;  // residuals are normalized by their own tolerances
  rep.details.emplace_back("slope", slope);
  for (const auto& s : samples) {
    rep.residuals.push_back(std::max(0.0, s.G - slope) / upper_tol);
    rep.details.emplace_back(fmt("G_eps_", s.epsilon), s.G);
  }
  const double final_gap = std::abs(samples.back().G - slope);
  rep.residuals.push_back(final_gap / final_tol);
  rep.details.emplace_back("final_gap", final_gap);
  rep.finish();
  return rep;
}

namespace {

std::vector<std::vector<double>> probe_directions(const SpaceSpec& space, const ProbeOptions& probe) {
  const int n = space.dim();
  std::vector<std::vector<double>> dirs;
  for (int k = 0; k < n; ++k)
    for (double sgn : {1.0, -1.0}) {
      std::vector<double> e(n, 0.0);
      e[k] = sgn;
      dirs.push_back(e);
    }
  if (n > 1) {
    std::mt19937_64 rng(probe.seed);
    std::normal_distribution<double> gauss;
    for (int j = 0; j < probe.random_directions; ++j) {
      std::vector<double> e(n);
      for (double& v : e) v = gauss(rng);
      dirs.push_back(e);
    }
  }
  // unit length in the metric
  const std::vector<double> zero(n, 0.0);
  for (auto& e : dirs) {
    double len = 0.0;
    if (space.kind() == SpaceSpec::Kind::quantile1d) {
      for (double v : e) len += v * v;
      len = std::sqrt(len * space.weight());
    } else {
      len = distance(SpaceSpec::pnorm(n, space.kind() == SpaceSpec::Kind::pnorm ? space.p() : 2.0),
                     e, zero);
    }
    for (double& v : e) v /= len;
  }
  return dirs;
}

}  // namespace

SlopeProbe probe_value_slope(const EnergySpec& energy, const SpaceSpec& space, const Point& x,
                             double eps, const ProbeOptions& probe, const ValueOptions& opts,
                             ValueCache* cache) {
  if (!(probe.h0 > 0.0) || probe.levels < 1) throw InvalidInput("probe needs h0 > 0 and levels >= 1");
  const auto dirs = probe_directions(space, probe);
  struct Job {
    int level;
    std::vector<double> y;
  };
  std::vector<Job> jobs;
  const auto xc = x.vec();
  for (int k = 0; k < probe.levels; ++k) {
    const double h = probe.h0 * std::ldexp(1.0, -k);
    for (const auto& e : dirs) {
      std::vector<double> y(xc);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] -= h * e[i];
      if (!in_space(space, y) || !std::isfinite(energy_eval(energy, y))) continue;
      jobs.push_back({k, std::move(y)});
    }
  }
  const double Vx = value_function(energy, space, x, eps, opts, cache).V;
  auto vals = ordered_parallel_map(jobs, opts.jobs, [&](const Job& j) {
    return value_function(energy, space, Point(space, j.y), eps, opts, cache).V;
  });
  std::vector<double> q(probe.levels, 0.0);
  std::vector<bool> seen(probe.levels, false);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const double d = distance(space, xc, jobs[j].y);
    const int k = jobs[j].level;
    q[k] = std::max(q[k], std::max(0.0, Vx - vals[j]) / d);
    seen[k] = true;
  }
  SlopeProbe out;
  for (int k = 0; k < probe.levels; ++k) {
    if (!seen[k]) throw NumericError("no admissible probe direction at some probe radius");
    out.quotients.emplace_back(probe.h0 * std::ldexp(1.0, -k), q[k]);
  }
  const int K = probe.levels - 1;
  out.last_quotient = q[K];
  out.estimate = K >= 1 ? std::max(0.0, 2.0 * q[K] - q[K - 1]) : q[K];
  return out;
}

IdentityReport check_hj(const EnergySpec& energy, const SpaceSpec& space, const Point& x,
                        double eps, const ProbeOptions& probe, const ValueOptions& opts,
                        ValueCache* cache, double tolerance) {
  if (!energy.lambda) throw InvalidInput("HJ check needs a lambda-convex energy (lambda set)");
  const ValueSample s = value_function(energy, space, x, eps, opts, cache);
  const SlopeProbe p = probe_value_slope(energy, space, x, eps, probe, opts, cache);
  constexpr double floor = 1e-8;
  auto rel = [&](double a, double b) {
    const double scale = std::max(std::abs(b), floor);
    return std::abs(a - b) / (std::abs(b) < floor ? 1.0 : scale);
  };
  IdentityReport rep{"hj"};
  rep.tolerance = tolerance;
  rep.residuals.push_back(rel(p.estimate, s.G));
  rep.details = {{"G", s.G}, {"probe_slope", p.estimate}, {"last_quotient", p.last_quotient}};

  const WedSolution& sol = *s.solution;
  const std::vector<double> V = value_along(sol);
  const TimeGrid& grid = sol.trajectory.grid();
  for (int j = 0; j < probe.along_nodes; ++j) {
    const int k = std::clamp(nearest_node(grid, 0.5 * eps * std::ldexp(1.0, j)), 1, grid.cells() - 1);
    const Point uk = sol.trajectory.point(k);
    const double est = probe_value_slope(energy, space, uk, eps, probe, opts, cache).estimate;
    const double dVdt = (V[k + 1] - V[k - 1]) / (grid.nodes[k + 1] - grid.nodes[k - 1]);
    const double S = 0.5 * (sol.speed[k - 1] * sol.speed[k - 1] + sol.speed[k] * sol.speed[k]);
    const double target = 0.5 * S + 0.5 * est * est;
    const double r = rel(-dVdt, target);
    rep.residuals.push_back(r);
    rep.details.emplace_back(fmt("gflow_t_", grid.nodes[k]), r);
  }
  rep.finish();
  return rep;
}

ScalarField finsler_weight(const EnergySpec& energy) {
  return [energy](std::span<const double> x) {
    return std::sqrt(std::max(1.0, energy_eval(energy, x)));
  };
}

}  // namespace wed
