#pragma once

#include <memory>
#include <string>
#include <vector>

#include "wed/energy.hpp"
#include "wed/error.hpp"
#include "wed/space.hpp"
#include "wed/trajectory.hpp"

namespace wed {

enum class Solver { direct, euler_lagrange };

/// Metric for the initial inverse Hessian of the direct solver. `kinetic`
/// inverts the exact tridiagonal Hessian of the kinetic term (plus a diagonal
/// energy curvature shift); `mass_diagonal` divides node gradients by the
/// adjacent cell masses.
enum class Preconditioning { kinetic, mass_diagonal };

std::string to_string(Solver s);
std::string to_string(GridMode m);
std::string to_string(Preconditioning p);

/// Localized WED problem on [0, T]: minimize over discrete curves starting
/// at x_bar and frozen after T
///   I = sum_i m_i (eps/2 v_i^2 + phi(u_i)) + exp(-T/eps) phi(u_N).
struct WedProblem {
  double epsilon;
  double T;
  int N;
  GridMode grid_mode;
  SpaceSpec space;
  EnergySpec energy;
  Point x_bar;
  Solver solver = Solver::direct;
  double grad_tol = 1e-10;
  int max_iter = 20000;
  Preconditioning preconditioning = Preconditioning::kinetic;
};

/// Solver horizon for an observation window: max(T_obs, 25 eps). With the
/// terminal term the tail weight is below 1.4e-11 for T >= 25 eps.
double default_horizon(double T_obs, double eps);

/// Solver horizon and cell count for an observation window [0, T_obs]
/// resolved with N cells. Uniform grids keep the step T_obs/N on the
/// extended horizon; exp-graded grids keep N.
struct Horizon {
  double T;
  int N;
};
Horizon resolve_horizon(double T_obs, int N, double eps, GridMode mode);

/// Throws InvalidInput when eps, T, N are out of range, when
/// 1/(16 eps) < B (coercivity constant), or when x_bar is outside D(phi).
void validate(const WedProblem& problem);

struct WedSolution {
  Trajectory trajectory;
  Weights weights;
  double epsilon = 0.0;
  double objective = 0.0;
  std::vector<double> speed;  // per cell
  std::vector<double> phi;    // per node
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  Solver solver = Solver::direct;
  std::vector<double> trace;
};

/// Raised when a solver hits its iteration cap or stalls; carries the best
/// iterate found.
class NonConvergence : public NumericError {
 public:
  NonConvergence(const std::string& what, std::shared_ptr<const WedSolution> best)
      : NumericError(what, best ? best->trace : std::vector<double>{}),
        best_(std::move(best)) {}
  const WedSolution& best() const { return *best_; }

 private:
  std::shared_ptr<const WedSolution> best_;
};

/// Discrete WED objective; +inf if any node is outside D(phi).
double wed_value(const WedProblem& problem, const Trajectory& traj);

/// Same objective for an arbitrary trajectory, energy and eps.
double wed_objective(const Trajectory& traj, const EnergySpec& energy, double eps);

/// Direct minimization (preconditioned L-BFGS from the constant curve).
WedSolution minimize_wed(const WedProblem& problem);

/// Newton on the finite-difference Euler-Lagrange system
///   -eps u'' + u' + grad phi(u) = 0,  u(0) = x_bar,
/// with the natural boundary condition u'(T) + grad phi(u(T)) = 0 of the
/// localized functional. Gradients are Riesz representatives in the metric.
WedSolution solve_euler_lagrange(const WedProblem& problem);

/// Dispatches on problem.solver.
WedSolution solve(const WedProblem& problem);

/// Builds a WedSolution record for a given trajectory.
WedSolution make_solution(const WedProblem& problem, Trajectory traj);

struct InnerVariationReport {
  std::vector<double> residuals;  // per cell pair, d/dt(phi - eps/2|u'|^2) + |u'|^2
  double max_residual = 0.0;
  double speed_scale = 0.0;       // max |u'|^2
  double boundary_residual = 0.0; // relative gap of I = V(0) + e^{-T/eps}(phi(u_T) - V(T))
};

InnerVariationReport check_inner_variation(const WedSolution& sol, const EnergySpec& energy);

}  // namespace wed
