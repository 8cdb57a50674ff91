#include "wed/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace wed {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Pair {
  std::vector<double> s, y;
  double rho;
};

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, std::vector<double> x0,
                           const LbfgsOptions& options,
                           const Preconditioner& preconditioner,
                           const GradientNorm& grad_norm) {
  const std::size_t n = x0.size();
  auto apply_p = [&](std::span<const double> g, std::span<double> out) {
    if (preconditioner) {
      preconditioner(g, out);
    } else {
      std::copy(g.begin(), g.end(), out.begin());
    }
  };
  auto norm_of = [&](std::span<const double> g) {
    return grad_norm ? grad_norm(g) : std::sqrt(dot(g, g));
  };

  LbfgsResult result;
  std::vector<double> x = std::move(x0);
  std::vector<double> g(n), g_new(n), x_new(n), d(n), q(n), r(n);
  double f = objective(x, g);
  if (!std::isfinite(f)) {
    result.x = x;
    result.f = f;
    result.message = "initial point has non-finite objective";
    return result;
  }
  std::deque<Pair> memory;
  double gamma = 1.0;
  double gnorm = norm_of(g);
  result.trace.push_back(f);

  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    if (gnorm <= options.grad_tol) {
      result.converged = true;
      break;
    }
    // two-loop recursion with H0 = gamma P^{-1}
    q = g;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      alpha[k] = memory[k].rho * dot(memory[k].s, q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * memory[k].y[i];
    }
    apply_p(q, r);
    for (std::size_t i = 0; i < n; ++i) r[i] *= gamma;
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const double beta = memory[k].rho * dot(memory[k].y, r);
      for (std::size_t i = 0; i < n; ++i) r[i] += memory[k].s[i] * (alpha[k] - beta);
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
    double gd = dot(g, d);
    if (!(gd < 0.0)) {
      memory.clear();
      gamma = 1.0;
      apply_p(g, r);
      for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
      gd = dot(g, d);
      if (!(gd < 0.0)) {
        result.message = "preconditioned gradient is not a descent direction";
        break;
      }
    }

    const double f_noise = 1e-13 * (1.0 + std::abs(f));
    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new)) {
        if (f_new <= f + options.armijo * step * gd) {
          accepted = true;
          break;
        }
        if (f_new <= f + f_noise &&
            dot(g_new, d) <= (2.0 * options.armijo - 1.0) * gd) {
          accepted = true;
          break;
        }
      }
      step *= options.backtrack;
    }
    if (!accepted) {
      if (!memory.empty()) {
        memory.clear();
        gamma = 1.0;
        continue;
      }
      result.message = "line search failed";
      break;
    }

    Pair pair{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = x_new[i] - x[i];
      pair.y[i] = g_new[i] - g[i];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-300) {
      apply_p(pair.y, r);
      const double ypy = dot(pair.y, r);
      if (ypy > 0.0) gamma = sy / ypy;
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    gnorm = norm_of(g);
    result.trace.push_back(f);
  }
  if (!result.converged && iter >= options.max_iter) {
    result.message = "iteration cap reached";
  }
  result.x = std::move(x);
  result.f = f;
  result.grad_norm = gnorm;
  result.iterations = iter;
  return result;
}

}  // namespace wed
