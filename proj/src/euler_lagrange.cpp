#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "wed/wed.hpp"

namespace wed {

namespace {

struct Stencil {
  double lo, mid, hi;  // coefficients of u_{i-1}, u_i, u_{i+1}
};

// -eps u'' + u' at interior node with steps hm = t_i - t_{i-1}, hp = t_{i+1} - t_i.
Stencil interior(double eps, double hm, double hp) {
  const double s = hm + hp;
  const double c_lo = 2.0 / (hm * s), c_mid = -2.0 / (hm * hp), c_hi = 2.0 / (hp * s);
  const double d_lo = -hp / (hm * s), d_mid = (hp - hm) / (hm * hp), d_hi = hm / (hp * s);
  return {-eps * c_lo + d_lo, -eps * c_mid + d_mid, -eps * c_hi + d_hi};
}

// Second-order backward u'(T): coefficients of u_{N-2}, u_{N-1}, u_N.
Stencil terminal(double h1, double h2) {
  return {h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (h1 + 2.0 * h2) / (h2 * (h1 + h2))};
}

}  // namespace

WedSolution solve_euler_lagrange(const WedProblem& pb) {
  validate(pb);
  if (!pb.space.hilbertian()) throw InvalidInput("the Euler-Lagrange backend needs a Hilbertian space");
  const double eps = pb.epsilon;
  TimeGrid grid = make_grid(pb.grid_mode, eps, pb.T, pb.N);
  const int N = pb.N;
  const int d = pb.space.dim();
  const double inv_w = 1.0 / pb.space.weight();
  const std::vector<double>& t = grid.nodes;

  std::vector<Stencil> st(N + 1);
  double stiff = 0.0;
  for (int i = 1; i < N; ++i) {
    st[i] = interior(eps, t[i] - t[i - 1], t[i + 1] - t[i]);
    stiff = std::max(stiff, std::abs(st[i].mid));
  }
  st[N] = terminal(t[N - 1] - t[N - 2], t[N] - t[N - 1]);
  stiff = std::max(stiff, std::abs(st[N].hi));

  const std::size_t n = static_cast<std::size_t>(N) * d;
  std::vector<double> u(static_cast<std::size_t>(N + 1) * d);
  for (int j = 0; j <= N; ++j)
    std::copy(pb.x_bar.vec().begin(), pb.x_bar.vec().end(), u.begin() + static_cast<std::size_t>(j) * d);

  auto at = [&](const std::vector<double>& v, int j) {
    return std::span<const double>(v.data() + static_cast<std::size_t>(j) * d, d);
  };

  // Residual over nodes 1..N; false when some node leaves the domain.
  auto residual = [&](const std::vector<double>& v, Eigen::VectorXd& F) -> bool {
    F.resize(static_cast<Eigen::Index>(n));
    std::vector<double> g(d);
    for (int j = 1; j <= N; ++j) {
      auto uj = at(v, j);
      if (!in_space(pb.space, uj) || !std::isfinite(energy_eval(pb.energy, uj))) return false;
      energy_grad(pb.energy, uj, g);
      const int a = j < N ? j - 1 : N - 2;
      for (int k = 0; k < d; ++k) {
        const double val = st[j].lo * v[static_cast<std::size_t>(a) * d + k] +
                           st[j].mid * v[static_cast<std::size_t>(a + 1) * d + k] +
                           st[j].hi * v[static_cast<std::size_t>(a + 2) * d + k];
        F[static_cast<Eigen::Index>(j - 1) * d + k] = val + g[k] * inv_w;
      }
    }
    return true;
  };

  auto jacobian = [&](const std::vector<double>& v) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * (3 + d));
    for (int j = 1; j <= N; ++j) {
      const Eigen::MatrixXd H = energy_hessian(pb.energy, at(v, j));
      const int a = j < N ? j - 1 : N - 2;
      const double coef[3] = {st[j].lo, st[j].mid, st[j].hi};
      for (int k = 0; k < d; ++k) {
        const int row = (j - 1) * d + k;
        for (int q = 0; q < 3; ++q) {
          const int node = a + q;
          if (node == 0) continue;
          trip.emplace_back(row, (node - 1) * d + k, coef[q]);
        }
        for (int l = 0; l < d; ++l)
          if (H(k, l) != 0.0) trip.emplace_back(row, (j - 1) * d + l, H(k, l) * inv_w);
      }
    }
    Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  };

  double umax = 0.0;
  for (double x : u) umax = std::max(umax, std::abs(x));
  Eigen::VectorXd F;
  if (!residual(u, F)) throw DomainError("initial curve is outside the domain");
  std::vector<double> trace;
  int it = 0;
  bool converged = false;
  std::string message = "iteration cap reached";
  double fnorm = F.lpNorm<Eigen::Infinity>();
  trace.push_back(fnorm);
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  for (; it < pb.max_iter; ++it) {
    const double floor = 64.0 * 2.2e-16 * stiff * std::max(umax, 1.0);
    if (fnorm <= std::max(pb.grad_tol, floor)) {
      converged = true;
      message = "residual below tolerance";
      break;
    }
    Eigen::SparseMatrix<double> J = jacobian(u);
    if (it == 0) lu.analyzePattern(J);
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      message = "singular Jacobian";
      break;
    }
    const Eigen::VectorXd step = lu.solve(F);
    double alpha = 1.0;
    const double f2 = F.squaredNorm();
    bool accepted = false;
    std::vector<double> trial(u);
    Eigen::VectorXd Ft;
    for (int bt = 0; bt < 40; ++bt, alpha *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[d + i] = u[d + i] - alpha * step[static_cast<Eigen::Index>(i)];
      if (!residual(trial, Ft)) continue;
      if (Ft.squaredNorm() <= (1.0 - 1e-4 * alpha) * f2 || Ft.lpNorm<Eigen::Infinity>() <= floor) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      double smax = step.lpNorm<Eigen::Infinity>();
      if (smax <= 1e-13 * std::max(umax, 1.0) && fnorm <= 1e3 * std::max(pb.grad_tol, floor)) {
        converged = true;
        message = "step stalled at rounding level";
      } else {
        message = "damped Newton line search failed";
      }
      break;
    }
    u.swap(trial);
    F = Ft;
    fnorm = F.lpNorm<Eigen::Infinity>();
    umax = 0.0;
    for (double x : u) umax = std::max(umax, std::abs(x));
    trace.push_back(fnorm);
    if ((step * alpha).lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(umax, 1.0) &&
        fnorm <= 1e3 * std::max(pb.grad_tol, floor)) {
      converged = true;
      message = "step stalled at rounding level";
      ++it;
      break;
    }
  }

  WedProblem rec = pb;
  rec.solver = Solver::euler_lagrange;
  WedSolution sol = make_solution(rec, Trajectory(pb.space, std::move(grid), std::move(u)));
  sol.converged = converged;
  sol.iterations = it;
  sol.gradient_norm = fnorm;
  sol.trace = std::move(trace);
  if (!converged) {
    std::ostringstream os;
    os << "Euler-Lagrange solver did not converge after " << it << " iterations (residual "
       << fnorm << "): " << message;
    throw NonConvergence(os.str(), std::make_shared<const WedSolution>(std::move(sol)));
  }
  return sol;
}

}  // namespace wed
