#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace wed {

/// Evaluates f(x) and writes its gradient into `grad`. May return +inf for
/// points outside the domain; the line search then backtracks.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Applies an approximate inverse Hessian: out = P^{-1} g.
using Preconditioner = std::function<void(std::span<const double> g, std::span<double> out)>;

/// Norm used for the stopping test.
using GradientNorm = std::function<double(std::span<const double> g)>;

struct LbfgsOptions {
  int memory = 12;
  int max_iter = 20000;
  double grad_tol = 1e-10;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
};

struct LbfgsResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> trace;  // objective value per iteration
};

/// Limited-memory BFGS with backtracking. The sufficient-decrease test falls
/// back to the approximate Armijo condition on directional derivatives once
/// objective differences drop below rounding, which matters for the
/// exponentially weighted objectives where late nodes carry ~1e-10 weight.
LbfgsResult minimize_lbfgs(const Objective& objective, std::vector<double> x0,
                           const LbfgsOptions& options,
                           const Preconditioner& preconditioner = {},
                           const GradientNorm& grad_norm = {});

}  // namespace wed
