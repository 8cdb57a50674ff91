#include "wed/wed.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "wed/lbfgs.hpp"

namespace wed {

std::string to_string(Solver s) {
  return s == Solver::direct ? "direct" : "euler_lagrange";
}

std::string to_string(GridMode m) {
  return m == GridMode::uniform ? "uniform" : "exp_graded";
}

std::string to_string(Preconditioning p) {
  return p == Preconditioning::kinetic ? "kinetic" : "mass_diagonal";
}

double default_horizon(double T_obs, double eps) {
  if (!(T_obs > 0.0) || !(eps > 0.0)) throw InvalidInput("horizon needs T > 0 and eps > 0");
  return std::max(T_obs, 25.0 * eps);
}

Horizon resolve_horizon(double T_obs, int N, double eps, GridMode mode) {
  if (N < 2) throw InvalidInput("N must be at least 2");
  const double T = default_horizon(T_obs, eps);
  if (mode == GridMode::exp_graded || T == T_obs) return {T, N};
  return {T, static_cast<int>(std::ceil(N * (T / T_obs) - 1e-9))};
}

void validate(const WedProblem& pb) {
  if (!(pb.epsilon > 0.0) || !std::isfinite(pb.epsilon))
    throw InvalidInput("epsilon must be positive and finite");
  if (!(pb.T > 0.0) || !std::isfinite(pb.T)) throw InvalidInput("T must be positive and finite");
  if (pb.N < 2) throw InvalidInput("N must be at least 2");
  if (!(pb.grad_tol > 0.0)) throw InvalidInput("grad_tol must be positive");
  if (pb.max_iter < 1) throw InvalidInput("max_iter must be positive");
  if (!(pb.x_bar.space() == pb.space)) throw InvalidInput("x_bar does not belong to the problem space");
  check_compatible(pb.energy, pb.space);
  const double B = pb.energy.coercivity.B;
  if (1.0 / (16.0 * pb.epsilon) < B) {
    std::ostringstream os;
    os << "epsilon " << pb.epsilon << " violates 1/(16 eps) >= B = " << B;
    throw InvalidInput(os.str());
  }
  if (!std::isfinite(energy_eval(pb.energy, pb.x_bar)))
    throw InvalidInput("x_bar is outside the domain of the energy");
  if (pb.solver == Solver::euler_lagrange && !pb.space.hilbertian())
    throw InvalidInput("the Euler-Lagrange backend needs a Hilbertian space");
}

double wed_objective(const Trajectory& traj, const EnergySpec& energy, double eps) {
  const Weights w = make_weights(traj.grid(), eps);
  const int N = traj.cells();
  const SpaceSpec& sp = traj.space();
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    const double phi = energy_eval(energy, traj.at(i));
    if (!std::isfinite(phi)) return kInfiniteEnergy;
    const double dt = traj.grid().step(i);
    const double d2 = squared_distance(sp, traj.at(i), traj.at(i + 1));
    sum += w.masses[i] * (0.5 * eps * d2 / (dt * dt) + phi);
  }
  const double phiN = energy_eval(energy, traj.at(N));
  if (!std::isfinite(phiN)) return kInfiniteEnergy;
  return sum + w.tail * phiN;
}

double wed_value(const WedProblem& pb, const Trajectory& traj) {
  if (!(traj.space() == pb.space)) throw InvalidInput("trajectory space differs from problem space");
  if (traj.cells() != pb.N || std::abs(traj.grid().horizon() - pb.T) > 1e-12 * pb.T)
    throw InvalidInput("trajectory grid does not match the problem's T and N");
  const auto x0 = traj.at(0);
  for (std::size_t k = 0; k < x0.size(); ++k)
    if (x0[k] != pb.x_bar[k]) throw InvalidInput("trajectory does not start at x_bar");
  return wed_objective(traj, pb.energy, pb.epsilon);
}

WedSolution make_solution(const WedProblem& pb, Trajectory traj) {
  Weights w = make_weights(traj.grid(), pb.epsilon);
  const double obj = wed_objective(traj, pb.energy, pb.epsilon);
  std::vector<double> speed = metric_speed(traj);
  std::vector<double> phi(traj.cells() + 1);
  for (int i = 0; i <= traj.cells(); ++i) phi[i] = energy_eval(pb.energy, traj.at(i));
  WedSolution sol{std::move(traj), std::move(w)};
  sol.epsilon = pb.epsilon;
  sol.objective = obj;
  sol.speed = std::move(speed);
  sol.phi = std::move(phi);
  sol.solver = pb.solver;
  return sol;
}

namespace {

// Per-component Thomas factorization of the tridiagonal kinetic Hessian
// (with diagonal shift), nodes 1..N.
struct Tridiagonal {
  int n = 0;
  std::vector<double> lower;  // sub-diagonal a_j (couples j with j-1)
  std::vector<double> cprime;
  std::vector<double> denom;

  void factor(const std::vector<double>& diag, const std::vector<double>& off) {
    n = static_cast<int>(diag.size());
    lower.assign(n, 0.0);
    cprime.assign(n, 0.0);
    denom.assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
      const double a = j > 0 ? off[j - 1] : 0.0;
      lower[j] = a;
      const double d = diag[j] - (j > 0 ? a * cprime[j - 1] : 0.0);
      if (!(d > 0.0)) throw NumericError("kinetic preconditioner is not positive definite");
      denom[j] = d;
      cprime[j] = j + 1 < n ? off[j] / d : 0.0;
    }
  }

  // Solves in place on a strided vector.
  void solve(double* x, int stride) const {
    std::vector<double> y(n);
    for (int j = 0; j < n; ++j) {
      const double prev = j > 0 ? y[j - 1] : 0.0;
      y[j] = (x[static_cast<std::size_t>(j) * stride] - lower[j] * prev) / denom[j];
    }
    for (int j = n - 2; j >= 0; --j) y[j] -= cprime[j] * y[j + 1];
    for (int j = 0; j < n; ++j) x[static_cast<std::size_t>(j) * stride] = y[j];
  }
};

}  // namespace

WedSolution minimize_wed(const WedProblem& pb) {
  validate(pb);
  const double eps = pb.epsilon;
  TimeGrid grid = make_grid(pb.grid_mode, eps, pb.T, pb.N);
  const Weights wts = make_weights(grid, eps);
  const SpaceSpec& sp = pb.space;
  const int N = pb.N;
  const int d = sp.dim();
  const double wmetric = sp.hilbertian() ? sp.weight() : 1.0;
  const std::vector<double>& m = wts.masses;
  std::vector<double> dt(N);
  for (int i = 0; i < N; ++i) dt[i] = grid.step(i);
  const std::vector<double> xbar = pb.x_bar.vec();
  const double phi0 = energy_eval(pb.energy, pb.x_bar);

  auto node = [&](std::span<const double> z, int j) -> std::span<const double> {
    if (j == 0) return xbar;
    return z.subspan(static_cast<std::size_t>(j - 1) * d, d);
  };

  Objective objective = [&](std::span<const double> z, std::span<double> g) -> double {
    std::fill(g.begin(), g.end(), 0.0);
    for (int j = 1; j <= N; ++j)
      if (!in_space(sp, node(z, j))) return kInfiniteEnergy;
    double f = m[0] * phi0;
    std::vector<double> tmp(d), eg(d);
    for (int i = 0; i < N; ++i) {
      auto a = node(z, i);
      auto b = node(z, i + 1);
      const double c = 0.5 * eps * m[i] / (dt[i] * dt[i]);
      f += c * squared_distance(sp, a, b);
      squared_distance_grad(sp, b, a, tmp);
      for (int k = 0; k < d; ++k) g[static_cast<std::size_t>(i) * d + k] += c * tmp[k];
      if (i > 0) {
        squared_distance_grad(sp, a, b, tmp);
        for (int k = 0; k < d; ++k) g[static_cast<std::size_t>(i - 1) * d + k] += c * tmp[k];
      }
    }
    for (int j = 1; j <= N; ++j) {
      const double wj = j < N ? m[j] : wts.tail;
      auto u = node(z, j);
      const double phi = energy_eval(pb.energy, u);
      if (!std::isfinite(phi)) return kInfiniteEnergy;
      f += wj * phi;
      energy_grad(pb.energy, u, eg);
      for (int k = 0; k < d; ++k) g[static_cast<std::size_t>(j - 1) * d + k] += wj * eg[k];
    }
    return f;
  };

  // Node masses D_j used by the mass-diagonal preconditioner and by the
  // reported gradient norm.
  std::vector<double> D(N);
  for (int j = 1; j <= N; ++j) D[j - 1] = m[j - 1] + (j < N ? m[j] : wts.tail);

  Preconditioner precond;
  std::vector<Tridiagonal> tri;
  Eigen::MatrixXd Q;
  if (pb.preconditioning == Preconditioning::kinetic) {
    // K (x) I + diag(D) (x) H(x_bar) decouples in the eigenbasis of H(x_bar)
    // into one tridiagonal system per eigenvalue.
    const Eigen::MatrixXd H = energy_hessian(pb.energy, pb.x_bar.coords());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
    Q = es.eigenvectors();
    tri.resize(d);
    std::vector<double> diag(N), off(N > 1 ? N - 1 : 0);
    for (int k = 0; k < d; ++k) {
      const double shift = std::max(es.eigenvalues()[k], 0.0);
      for (int j = 1; j <= N; ++j) {
        const double cl = eps * m[j - 1] * wmetric / (dt[j - 1] * dt[j - 1]);
        const double cr = j < N ? eps * m[j] * wmetric / (dt[j] * dt[j]) : 0.0;
        diag[j - 1] = cl + cr + shift * D[j - 1];
        if (j < N) off[j - 1] = -cr;
      }
      tri[k].factor(diag, off);
    }
    precond = [&tri, &Q, d, N](std::span<const double> g, std::span<double> out) {
      Eigen::Map<const Eigen::MatrixXd> G(g.data(), d, N);
      Eigen::Map<Eigen::MatrixXd> O(out.data(), d, N);
      O.noalias() = Q.transpose() * G;
      for (int k = 0; k < d; ++k) tri[k].solve(out.data() + k, d);
      const Eigen::MatrixXd R = Q * O;
      O = R;
    };
  } else {
    precond = [&D, d, wmetric](std::span<const double> g, std::span<double> out) {
      for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] / (D[i / d] * wmetric);
    };
  }

  // Sup norm of the mass-scaled gradient g_j / D_j, a discrete
  // Euler-Lagrange residual that does not fade with e^{-t/eps}.
  GradientNorm gnorm = [&D, &sp, d](std::span<const double> g) {
    double s = 0.0;
    for (std::size_t j = 0; j < D.size(); ++j)
      s = std::max(s, dual_norm(sp, g.subspan(j * d, d)) / D[j]);
    return s;
  };

  std::vector<double> z0(static_cast<std::size_t>(N) * d);
  for (int j = 0; j < N; ++j) std::copy(xbar.begin(), xbar.end(), z0.begin() + static_cast<std::size_t>(j) * d);

  // Rounding floor of the gradient norm: the kinetic stencil entries
  // c (2u_j - u_{j-1} - u_{j+1}) lose about 4 ulp of c |u| each.
  double xscale = 1.0;
  for (double v : xbar) xscale = std::max(xscale, std::abs(v));
  double floor = 0.0;
  for (int j = 1; j <= N; ++j) {
    const double cl = eps * m[j - 1] * wmetric / (dt[j - 1] * dt[j - 1]);
    const double cr = j < N ? eps * m[j] * wmetric / (dt[j] * dt[j]) : 0.0;
    floor = std::max(floor, 4.0 * 2.2e-16 * xscale * (cl + cr) * std::sqrt(d / wmetric) / D[j - 1]);
  }
  LbfgsOptions opt;
  opt.grad_tol = std::max(pb.grad_tol, floor);
  opt.max_iter = pb.max_iter;
  LbfgsResult res = minimize_lbfgs(objective, std::move(z0), opt, precond, gnorm);

  std::vector<double> data(xbar);
  data.insert(data.end(), res.x.begin(), res.x.end());
  WedSolution sol = make_solution(pb, Trajectory(sp, std::move(grid), std::move(data)));
  sol.converged = res.converged;
  sol.iterations = res.iterations;
  sol.gradient_norm = res.grad_norm;
  sol.trace = std::move(res.trace);
  sol.solver = Solver::direct;
  if (!res.converged) {
    std::ostringstream os;
    os << "direct WED solver did not converge after " << res.iterations
       << " iterations (gradient norm " << res.grad_norm << "): " << res.message;
    throw NonConvergence(os.str(), std::make_shared<const WedSolution>(std::move(sol)));
  }
  return sol;
}

WedSolution solve(const WedProblem& pb) {
  return pb.solver == Solver::direct ? minimize_wed(pb) : solve_euler_lagrange(pb);
}

InnerVariationReport check_inner_variation(const WedSolution& sol, const EnergySpec& energy) {
  const Trajectory& tr = sol.trajectory;
  const int N = tr.cells();
  const double eps = sol.epsilon;
  if (N < 2) throw InvalidInput("inner variation check needs at least two cells");
  InnerVariationReport rep;
  std::vector<double> V(N);
  for (int i = 0; i < N; ++i) {
    V[i] = energy_eval(energy, tr.at(i)) - 0.5 * eps * sol.speed[i] * sol.speed[i];
    rep.speed_scale = std::max(rep.speed_scale, sol.speed[i] * sol.speed[i]);
  }
  rep.residuals.resize(N - 1);
  for (int i = 0; i + 1 < N; ++i) {
    rep.residuals[i] = (V[i + 1] - V[i]) / tr.grid().step(i) + sol.speed[i] * sol.speed[i];
    rep.max_residual = std::max(rep.max_residual, std::abs(rep.residuals[i]));
  }
  const double vT = sol.speed[N - 1];
  const double predicted = V[0] + sol.weights.tail * 0.5 * eps * vT * vT;
  rep.boundary_residual =
      std::abs(sol.objective - predicted) / std::max(std::abs(sol.objective), 1e-300);
  return rep;
}

}  // namespace wed
