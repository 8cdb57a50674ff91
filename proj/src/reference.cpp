#include "wed/reference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "wed/parallel.hpp"

namespace wed {

Point MMSolution::at(double t) const {
  if (!(t >= 0.0)) throw InvalidInput("MM interpolant needs t >= 0");
  const int k = std::min(steps(), static_cast<int>(std::ceil(t / tau - 1e-12)));
  return Point(space, iterates[std::max(k, 0)]);
}

Trajectory MMSolution::trajectory() const {
  std::vector<double> data;
  for (const auto& u : iterates) data.insert(data.end(), u.begin(), u.end());
  return Trajectory(space, uniform_grid(tau * steps(), steps()), std::move(data));
}

MMSolution minimizing_movements(const Point& x_bar, double tau, int steps,
                                const EnergySpec& energy, const SpaceSpec& space) {
  if (!(tau > 0.0)) throw InvalidInput("tau must be positive");
  if (steps < 1) throw InvalidInput("steps must be positive");
  if (energy.lambda && *energy.lambda < 0.0 && !(tau < 1.0 / (2.0 * -*energy.lambda)))
    throw InvalidInput("tau must be below 1/(2|lambda|)");
  if (!(x_bar.space() == space)) throw InvalidInput("x_bar does not belong to the space");
  check_compatible(energy, space);
  MMSolution mm{space, tau, {x_bar.vec()}, {}};
  for (int k = 0; k < steps; ++k) {
    YosidaResult y = yosida(energy, space, mm.iterates.back(), tau);
    mm.movement.push_back(distance(space, mm.iterates.back(), y.argmin));
    mm.iterates.push_back(std::move(y.argmin));
  }
  return mm;
}

Point exact_flow(const EnergySpec& energy, const Point& x_bar, double t) {
  if (!(t >= 0.0)) throw InvalidInput("exact_flow needs t >= 0");
  const SpaceSpec& space = x_bar.space();
  if (const auto* q = std::get_if<Quadratic>(&energy.kind)) {
    if (!space.hilbertian()) throw NotAvailable("quadratic closed form needs a Hilbertian space");
    // u' = -(A u - b)/w in the eigenbasis of A
    const double w = space.weight();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q->A);
    const Eigen::MatrixXd& Q = es.eigenvectors();
    const Eigen::VectorXd y0 = Q.transpose() * Eigen::Map<const Eigen::VectorXd>(x_bar.vec().data(), x_bar.size());
    const Eigen::VectorXd c = Q.transpose() * q->b / w;
    Eigen::VectorXd y(y0.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double l = es.eigenvalues()[i] / w;
      const double decay = std::exp(-l * t);
      // (1 - e^{-l t}) / l, continuous at l = 0
      const double integral = l == 0.0 ? t : -std::expm1(-l * t) / l;
      y[i] = decay * y0[i] + c[i] * integral;
    }
    const Eigen::VectorXd u = Q * y;
    return Point(space, std::vector<double>(u.data(), u.data() + u.size()));
  }
  if (const auto* ou = std::get_if<QuantileEntropyPotential>(&energy.kind)) {
    if (space.kind() != SpaceSpec::Kind::quantile1d)
      throw NotAvailable("OU closed form needs a quantile space");
    const int m = space.dim();
    if (m < 2) throw NotAvailable("OU closed form needs at least two quantiles");
    // least-squares fit x = m0 + s0 z
    const Point z = gaussian_quantiles(space, 0.0, 1.0);
    double zbar = 0.0, xbar = 0.0;
    for (int j = 0; j < m; ++j) {
      zbar += z[j] / m;
      xbar += x_bar[j] / m;
    }
    double szz = 0.0, szx = 0.0;
    for (int j = 0; j < m; ++j) {
      szz += (z[j] - zbar) * (z[j] - zbar);
      szx += (z[j] - zbar) * (x_bar[j] - xbar);
    }
    const double s0 = szx / szz, m0 = xbar - s0 * zbar;
    double fit = 0.0, scale = 1.0;
    for (int j = 0; j < m; ++j) {
      fit = std::max(fit, std::abs(x_bar[j] - m0 - s0 * z[j]));
      scale = std::max(scale, std::abs(x_bar[j]));
    }
    if (fit > 1e-9 * scale || !(s0 > 0.0))
      throw NotAvailable("OU closed form needs Gaussian quantiles as initial datum");
    const double v2 = ou->v2, mu_inf = -ou->v1 / ou->v2;
    const double mt = mu_inf + (m0 - mu_inf) * std::exp(-v2 * t);
    const double var = 1.0 / v2 + (s0 * s0 - 1.0 / v2) * std::exp(-2.0 * v2 * t);
    return gaussian_quantiles(space, mt, std::sqrt(var));
  }
  throw NotAvailable("no closed-form flow registered for energy kind " + energy.kind_name());
}

IdentityReport check_max_slope(const Trajectory& traj, const EnergySpec& energy, bool equality,
                               double tolerance, double t_max) {
  const int N = traj.cells();
  const TimeGrid& grid = traj.grid();
  const auto speed = metric_speed(traj);
  std::vector<double> phi(N + 1), slope2(N + 1);
  for (int i = 0; i <= N; ++i) {
    phi[i] = energy_eval(energy, traj.at(i));
    const double s = local_slope(energy, traj.space(), traj.at(i), SlopeMethod::analytic).value;
    slope2[i] = s * s;
  }
  double phimin = phi[0];
  std::vector<double> raw{0.0};
  double integral = 0.0;
  for (int i = 0; i < N && grid.nodes[i + 1] <= t_max * (1.0 + 1e-12); ++i) {
    const double dt = grid.step(i);
    integral += 0.5 * dt * (speed[i] * speed[i] + 0.5 * (slope2[i] + slope2[i + 1]));
    raw.push_back(phi[i + 1] + integral - phi[0]);
    phimin = std::min(phimin, phi[i + 1]);
  }
  const double scale = std::max(phi[0] - phimin, 1e-14 * (1.0 + std::abs(phi[0])));
  IdentityReport rep{equality ? "max_slope_equality" : "max_slope"};
  rep.tolerance = tolerance;
  for (double r : raw) rep.residuals.push_back((equality ? std::abs(r) : std::max(0.0, r)) / scale);
  rep.details = {{"dissipated_energy", phi[0] - phimin}};
  rep.finish();
  return rep;
}

std::vector<double> ConvergenceTable::ratios() const {
  std::vector<double> r;
  for (std::size_t k = 1; k < rows.size(); ++k) r.push_back(rows[k - 1].sup_err / rows[k].sup_err);
  return r;
}

ConvergenceTable convergence_study(const EnergySpec& energy, const SpaceSpec& space,
                                   const Point& x_bar, const std::vector<double>& eps_list,
                                   double T_obs, const ConvergenceOptions& opts) {
  if (eps_list.empty()) throw InvalidInput("convergence study needs eps values");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1])) throw InvalidInput("eps list must be strictly decreasing");
  if (!(T_obs > 0.0)) throw InvalidInput("T_obs must be positive");
  ConvergenceTable table;
  std::function<Point(double)> reference;
  try {
    (void)exact_flow(energy, x_bar, 0.0);
    reference = [&](double t) { return exact_flow(energy, x_bar, t); };
    table.reference = "exact";
  } catch (const NotAvailable&) {
    const double tau = opts.mm_tau_factor * eps_list.back() * eps_list.back();
    const int steps = static_cast<int>(std::ceil(T_obs / tau));
    auto mm = std::make_shared<MMSolution>(minimizing_movements(x_bar, tau, steps, energy, space));
    reference = [mm](double t) { return mm->at(t); };
    table.reference = "minimizing_movements";
  }
  const int N_obs = std::max(2, static_cast<int>(std::lround(opts.cells_per_unit * T_obs)));
  table.rows = ordered_parallel_map(eps_list, opts.jobs, [&](double eps) {
    const auto t0 = std::chrono::steady_clock::now();
    const Horizon hz = resolve_horizon(T_obs, N_obs, eps, GridMode::uniform);
    WedProblem pb{eps, hz.T, hz.N, GridMode::uniform, space, energy, x_bar};
    pb.solver = opts.solver;
    pb.grad_tol = opts.grad_tol;
    pb.max_iter = opts.max_iter;
    const WedSolution sol = solve(pb);
    ConvergenceRow row{eps};
    const TimeGrid& grid = sol.trajectory.grid();
    for (int i = 0; i <= grid.cells() && grid.nodes[i] <= T_obs * (1.0 + 1e-12); ++i)
      row.sup_err = std::max(row.sup_err, distance(sol.trajectory.point(i), reference(grid.nodes[i])));
    row.lsc_residual = check_max_slope(sol.trajectory, energy, false, 1.0, T_obs).max_residual;
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
  });
  for (const auto& r : table.rows) table.fitted_C = std::max(table.fitted_C, r.sup_err / r.epsilon);
  return table;
}

IdentityReport lambda_diagnostics(const WedSolution& sol, const EnergySpec& energy, double lambda,
                                  const LambdaOptions& opts) {
  (void)energy;
  const Trajectory& tr = sol.trajectory;
  const TimeGrid& grid = tr.grid();
  const double eps = sol.epsilon;
  const double t_end = grid.horizon() - opts.boundary_layer * eps;
  int last = 0;  // last node inside the window
  while (last < grid.cells() && grid.nodes[last + 1] <= t_end) ++last;
  if (last < 3) throw InvalidInput("lambda diagnostics need more nodes before the boundary layer");
  double h = 0.0;
  for (int i = 0; i < last; ++i) h = std::max(h, grid.step(i));
  IdentityReport rep{"lambda"};
  rep.tolerance = 1.0;

  auto monotone = [&](const std::vector<double>& f, const std::string& name) {
    double fmax = 0.0, worst = 0.0;
    for (double v : f) fmax = std::max(fmax, std::abs(v));
    const double tol = std::max(opts.tol_factor * h * h * fmax, 1e-300);
    for (std::size_t i = 1; i < f.size(); ++i) {
      const double viol = std::max(0.0, f[i] - f[i - 1]);
      worst = std::max(worst, viol);
      rep.residuals.push_back(viol / tol);
    }
    rep.details.emplace_back(name + "_violation", worst);
    rep.details.emplace_back(name + "_tol", tol);
  };

  if (lambda >= 0.0) {
    std::vector<double> phi(sol.phi.begin(), sol.phi.begin() + last + 1);
    monotone(phi, "phi_nonincreasing");
    std::vector<double> speed(sol.speed.begin(), sol.speed.begin() + last);
    monotone(speed, "speed_nonincreasing");
    std::vector<double> curv;
    for (int i = 1; i < last; ++i) {
      const double hm = grid.nodes[i] - grid.nodes[i - 1], hp = grid.nodes[i + 1] - grid.nodes[i];
      curv.push_back(2.0 * ((phi[i + 1] - phi[i]) / hp - (phi[i] - phi[i - 1]) / hm) / (hm + hp));
    }
    double cmax = 0.0, worst = 0.0;
    for (double c : curv) cmax = std::max(cmax, std::abs(c));
    const double tol = std::max(opts.tol_factor * h * h * cmax, 1e-300);
    for (double c : curv) {
      worst = std::max(worst, std::max(0.0, -c));
      rep.residuals.push_back(std::max(0.0, -c) / tol);
    }
    rep.details.emplace_back("phi_convex_violation", worst);
    rep.details.emplace_back("phi_convex_tol", tol);
  } else {
    if (!(1.0 + 8.0 * lambda * eps > 0.5))
      throw InvalidInput("lambda < 0 diagnostics need 1 + 8 lambda eps > 0.5");
    const double lp = opts.lambda_prime_factor * lambda;
    if (!(lp < lambda)) throw InvalidInput("lambda' must be below lambda");
    std::vector<double> f;
    for (int i = 0; i < last; ++i) {
      const double tm = 0.5 * (grid.nodes[i] + grid.nodes[i + 1]);
      f.push_back(std::exp(2.0 * lp * tm) * sol.speed[i] * sol.speed[i]);
    }
    monotone(f, "weighted_speed_nonincreasing");
    rep.details.emplace_back("lambda_prime", lp);
    rep.details.emplace_back("root_margin", 1.0 + 8.0 * lambda * eps);
  }
  rep.finish();
  return rep;
}

}  // namespace wed
