#pragma once

#include <limits>
#include <vector>

#include "wed/energy.hpp"
#include "wed/space.hpp"
#include "wed/trajectory.hpp"
#include "wed/value.hpp"
#include "wed/wed.hpp"

namespace wed {

/// Minimizing movement iterates u^{k+1} = argmin d^2(., u^k)/(2 tau) + phi.
struct MMSolution {
  SpaceSpec space;
  double tau = 0.0;
  std::vector<std::vector<double>> iterates;  // k = 0..steps
  std::vector<double> movement;               // d(u^k, u^{k+1})

  int steps() const { return static_cast<int>(movement.size()); }
  /// Piecewise-constant interpolant: u^k on ((k-1) tau, k tau].
  Point at(double t) const;
  /// Iterates as a trajectory on the uniform grid k tau.
  Trajectory trajectory() const;
};

MMSolution minimizing_movements(const Point& x_bar, double tau, int steps,
                                const EnergySpec& energy, const SpaceSpec& space);

/// Closed-form gradient flow: Quadratic (linear ODE), and the
/// Ornstein-Uhlenbeck flow of Gaussian quantiles for QuantileEntropyPotential
/// (x_bar must be Gaussian quantiles). Throws NotAvailable otherwise.
Point exact_flow(const EnergySpec& energy, const Point& x_bar, double t);

/// phi(u_k) + 1/2 int_0^{t_k} (|u'|^2 + |dphi|^2(u)) dt - phi(u_0) at every node
/// with t_k <= t_max, relative to the dissipated energy. Positive parts only
/// unless `equality`.
IdentityReport check_max_slope(const Trajectory& traj, const EnergySpec& energy,
                               bool equality = false, double tolerance = 5e-2,
                               double t_max = std::numeric_limits<double>::infinity());

struct ConvergenceOptions {
  double cells_per_unit = 1e5;  // uniform step 1/cells_per_unit
  Solver solver = Solver::direct;
  double grad_tol = 1e-10;
  int max_iter = 20000;
  int jobs = 1;
  double mm_tau_factor = 0.25;  // MM reference step tau = factor * eps_min^2
};

struct ConvergenceRow {
  double epsilon = 0.0;
  double sup_err = 0.0;
  double lsc_residual = 0.0;
  double runtime_s = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::string reference;  // "exact" or "minimizing_movements"
  double fitted_C = 0.0;  // max sup_err / eps
  std::vector<double> ratios() const;  // sup_err[k-1] / sup_err[k]
};

ConvergenceTable convergence_study(const EnergySpec& energy, const SpaceSpec& space,
                                   const Point& x_bar, const std::vector<double>& eps_list,
                                   double T_obs, const ConvergenceOptions& opts = {});

struct LambdaOptions {
  double lambda_prime_factor = 1.25;  // lambda' = factor * lambda for lambda < 0
  double boundary_layer = 5.0;        // skip nodes with t > T - boundary_layer * eps
  double tol_factor = 10.0;           // tol = factor * h^2 * max|f|
};

/// lambda >= 0: phi(u) nonincreasing and convex in t, |u'| nonincreasing.
/// lambda < 0: e^{2 lambda' t}|u'|^2 nonincreasing, which needs 1 + 8 lambda eps > 0.5.
IdentityReport lambda_diagnostics(const WedSolution& sol, const EnergySpec& energy,
                                  double lambda, const LambdaOptions& opts = {});

}  // namespace wed
