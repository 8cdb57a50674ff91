#include "wed/energy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "wed/error.hpp"
#include "wed/lbfgs.hpp"

namespace wed {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double poly(const std::vector<double>& c, double z) {
  double v = 0.0;
  for (std::size_t j = c.size(); j-- > 0;) v = v * z + c[j];
  return v;
}

double poly_deriv(const std::vector<double>& c, double z) {
  double v = 0.0;
  for (std::size_t j = c.size(); j-- > 1;) v = v * z + static_cast<double>(j) * c[j];
  return v;
}

void hash_combine(std::size_t& h, double v) {
  h ^= std::hash<double>{}(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

bool quantile_monotone(std::span<const double> q) {
  for (std::size_t j = 1; j < q.size(); ++j) {
    if (!(q[j] > q[j - 1])) return false;
  }
  return true;
}

double dirichlet_eval(const DiscreteDirichlet& e, std::span<const double> u) {
  const std::size_t n = u.size();
  double sum = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double left = k == 0 ? 0.0 : u[k - 1];
    const double right = k == n ? 0.0 : u[k];
    const double slope = (right - left) / e.h;
    sum += e.h / e.p * std::pow(std::abs(slope), e.p);
  }
  for (std::size_t k = 0; k < n; ++k) sum += e.h * poly(e.reaction, u[k]);
  return sum;
}

void dirichlet_grad(const DiscreteDirichlet& e, std::span<const double> u,
                    std::span<double> out) {
  const std::size_t n = u.size();
  auto flux = [&](std::size_t k) {
    const double left = k == 0 ? 0.0 : u[k - 1];
    const double right = k == n ? 0.0 : u[k];
    const double slope = (right - left) / e.h;
    return std::pow(std::abs(slope), e.p - 2.0) * slope;
  };
  for (std::size_t j = 0; j < n; ++j) {
    // node j+1 of the mesh is the right end of edge j and left end of edge j+1
    out[j] = flux(j) - flux(j + 1) + e.h * poly_deriv(e.reaction, u[j]);
  }
}

Eigen::MatrixXd fd_hessian(const EnergySpec& spec, std::span<const double> x) {
  const std::size_t n = x.size();
  Eigen::MatrixXd H(n, n);
  std::vector<double> xp(x.begin(), x.end()), gp(n), gm(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double step = 1e-5 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + step;
    energy_grad(spec, xp, gp);
    xp[j] = x[j] - step;
    energy_grad(spec, xp, gm);
    xp[j] = x[j];
    for (std::size_t i = 0; i < n; ++i) H(i, j) = (gp[i] - gm[i]) / (2.0 * step);
  }
  return 0.5 * (H + H.transpose());
}

}  // namespace

std::string EnergySpec::kind_name() const {
  return std::visit(overloaded{
                        [](const Quadratic&) { return std::string("quadratic"); },
                        [](const ConvexQuartic&) { return std::string("convex_quartic"); },
                        [](const DoubleWell&) { return std::string("double_well"); },
                        [](const DiscreteDirichlet&) { return std::string("discrete_dirichlet"); },
                        [](const QuantileEntropyPotential&) {
                          return std::string("quantile_entropy_potential");
                        },
                    },
                    kind);
}

std::size_t EnergySpec::hash() const {
  std::size_t h = kind.index();
  std::visit(overloaded{
                 [&](const Quadratic& q) {
                   for (Eigen::Index i = 0; i < q.A.size(); ++i) hash_combine(h, q.A.data()[i]);
                   for (Eigen::Index i = 0; i < q.b.size(); ++i) hash_combine(h, q.b[i]);
                 },
                 [](const ConvexQuartic&) {},
                 [](const DoubleWell&) {},
                 [&](const DiscreteDirichlet& d) {
                   hash_combine(h, d.p);
                   hash_combine(h, d.h);
                   for (double c : d.reaction) hash_combine(h, c);
                 },
                 [&](const QuantileEntropyPotential& q) {
                   hash_combine(h, q.v2);
                   hash_combine(h, q.v1);
                 },
             },
             kind);
  return h;
}

EnergySpec make_quadratic(Eigen::MatrixXd A, Eigen::VectorXd b) {
  if (A.rows() != A.cols() || A.rows() != b.size() || A.rows() == 0) {
    throw InvalidInput("quadratic energy: A must be square and match b");
  }
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidInput("quadratic energy: A must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  const double lmin = eig.eigenvalues().minCoeff();
  EnergySpec spec{Quadratic{A, b}, lmin, {}};
  const auto n = static_cast<std::size_t>(A.rows());
  spec.coercivity.u_star.assign(n, 0.0);
  if (lmin > 1e-14) {
    spec.coercivity.A = 0.5 * b.dot(A.ldlt().solve(b));
  } else if (lmin < -1e-14) {
    spec.coercivity.B = std::abs(lmin);
    spec.coercivity.A = b.squaredNorm() / (2.0 * std::abs(lmin));
  } else if (b.norm() > 0.0) {
    // unbounded below along the kernel; the user must supply constants
    spec.coercivity.B = 1.0;
    spec.coercivity.A = 0.25 * b.squaredNorm();
  }
  return spec;
}

EnergySpec make_scalar_quadratic(double a) {
  Eigen::MatrixXd A(1, 1);
  A(0, 0) = a;
  return make_quadratic(A, Eigen::VectorXd::Zero(1));
}

EnergySpec make_convex_quartic(int dim) {
  EnergySpec spec{ConvexQuartic{}, 0.0, {}};
  spec.coercivity.u_star.assign(dim, 0.0);
  return spec;
}

EnergySpec make_double_well(int dim) {
  EnergySpec spec{DoubleWell{}, -1.0, {}};
  spec.coercivity.u_star.assign(dim, 0.0);
  return spec;
}

EnergySpec make_discrete_dirichlet(double p, double h, std::vector<double> reaction,
                                   int dim) {
  if (!(p >= 2.0)) throw InvalidInput("discrete_dirichlet: p must be >= 2");
  if (!(h > 0.0)) throw InvalidInput("discrete_dirichlet: h must be > 0");
  if (dim < 1) throw InvalidInput("discrete_dirichlet: dim must be >= 1");
  EnergySpec spec{DiscreteDirichlet{p, h, std::move(reaction)}, std::nullopt, {}};
  const auto& rc = std::get<DiscreteDirichlet>(spec.kind).reaction;
  // The Dirichlet part is convex; with a reaction of degree <= 2 the energy is
  // lambda-convex with lambda = h * F'' (>= 0 part only when p == 2).
  if (rc.size() <= 3) {
    const double f2 = rc.size() == 3 ? 2.0 * rc[2] : 0.0;
    spec.lambda = h * f2;
  }
  double fmin = 0.0;
  for (int k = -400; k <= 400; ++k) fmin = std::min(fmin, poly(rc, k * 0.025));
  spec.coercivity.A = -fmin * h * dim;
  spec.coercivity.u_star.assign(dim, 0.0);
  return spec;
}

EnergySpec make_quantile_entropy(double v2, double v1, int m) {
  if (!(v2 > 0.0)) throw InvalidInput("quantile entropy: v2 must be > 0");
  EnergySpec spec{QuantileEntropyPotential{v2, v1}, v2, {}};
  const double pi = 3.14159265358979323846;
  const double cont_min =
      0.5 - v1 * v1 / (2.0 * v2) - 0.5 * std::log(2.0 * pi * std::exp(1.0) / v2);
  spec.coercivity.A = std::max(0.0, -cont_min + 0.5);
  spec.coercivity.u_star.assign(m, 0.0);
  return spec;
}

void check_compatible(const EnergySpec& spec, const SpaceSpec& space) {
  const int n = space.dim();
  std::visit(overloaded{
                 [&](const Quadratic& q) {
                   if (q.A.rows() != n) {
                     throw InvalidInput("quadratic energy dimension " +
                                        std::to_string(q.A.rows()) +
                                        " does not match space " + space.name());
                   }
                 },
                 [](const ConvexQuartic&) {},
                 [](const DoubleWell&) {},
                 [](const DiscreteDirichlet&) {},
                 [&](const QuantileEntropyPotential&) {
                   if (space.kind() != SpaceSpec::Kind::quantile1d) {
                     throw InvalidInput("quantile entropy energy needs a quantile1d space");
                   }
                 },
             },
             spec.kind);
  if (!spec.coercivity.u_star.empty() &&
      spec.coercivity.u_star.size() != static_cast<std::size_t>(n)) {
    throw InvalidInput("coercivity u_star has wrong dimension");
  }
  if (spec.coercivity.A < 0.0 || spec.coercivity.B < 0.0) {
    throw InvalidInput("coercivity constants must be nonnegative");
  }
}

double energy_eval(const EnergySpec& spec, std::span<const double> x) {
  return std::visit(
      overloaded{
          [&](const Quadratic& q) {
            if (static_cast<std::size_t>(q.A.rows()) != x.size()) {
              throw InvalidInput("quadratic energy: dimension mismatch");
            }
            Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
            return 0.5 * v.dot(q.A * v) - q.b.dot(v);
          },
          [&](const ConvexQuartic&) {
            double s = 0.0;
            for (double v : x) s += 0.25 * v * v * v * v;
            return s;
          },
          [&](const DoubleWell&) {
            double s = 0.0;
            for (double v : x) s += 0.25 * (v * v - 1.0) * (v * v - 1.0);
            return s;
          },
          [&](const DiscreteDirichlet& d) { return dirichlet_eval(d, x); },
          [&](const QuantileEntropyPotential& qe) {
            if (!quantile_monotone(x)) return kInfiniteEnergy;
            const double m = static_cast<double>(x.size());
            double s = 0.0;
            for (double q : x) s += 0.5 * qe.v2 * q * q + qe.v1 * q;
            for (std::size_t j = 0; j + 1 < x.size(); ++j) {
              s -= std::log(m * (x[j + 1] - x[j]));
            }
            return s / m;
          },
      },
      spec.kind);
}

double energy_eval(const EnergySpec& spec, const Point& x) {
  check_compatible(spec, x.space());
  return energy_eval(spec, x.coords());
}

void energy_grad(const EnergySpec& spec, std::span<const double> x, std::span<double> out) {
  std::visit(overloaded{
                 [&](const Quadratic& q) {
                   if (static_cast<std::size_t>(q.A.rows()) != x.size()) {
                     throw InvalidInput("quadratic energy: dimension mismatch");
                   }
                   Eigen::Map<const Eigen::VectorXd> v(x.data(),
                                                       static_cast<Eigen::Index>(x.size()));
                   Eigen::Map<Eigen::VectorXd> g(out.data(), static_cast<Eigen::Index>(out.size()));
                   g = q.A * v - q.b;
                 },
                 [&](const ConvexQuartic&) {
                   for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] * x[k] * x[k];
                 },
                 [&](const DoubleWell&) {
                   for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] * x[k] * x[k] - x[k];
                 },
                 [&](const DiscreteDirichlet& d) { dirichlet_grad(d, x, out); },
                 [&](const QuantileEntropyPotential& qe) {
                   if (!quantile_monotone(x)) {
                     throw DomainError("energy_grad: quantile point is not increasing");
                   }
                   const std::size_t m = x.size();
                   const double inv_m = 1.0 / static_cast<double>(m);
                   for (std::size_t j = 0; j < m; ++j) {
                     double g = qe.v2 * x[j] + qe.v1;
                     if (j + 1 < m) g += 1.0 / (x[j + 1] - x[j]);
                     if (j > 0) g -= 1.0 / (x[j] - x[j - 1]);
                     out[j] = g * inv_m;
                   }
                 },
             },
             spec.kind);
}

std::vector<double> energy_grad(const EnergySpec& spec, std::span<const double> x) {
  std::vector<double> g(x.size());
  energy_grad(spec, x, g);
  return g;
}

Eigen::MatrixXd energy_hessian(const EnergySpec& spec, std::span<const double> x) {
  const auto n = static_cast<Eigen::Index>(x.size());
  return std::visit(
      overloaded{
          [&](const Quadratic& q) -> Eigen::MatrixXd { return q.A; },
          [&](const ConvexQuartic&) -> Eigen::MatrixXd {
            Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
            for (Eigen::Index k = 0; k < n; ++k) H(k, k) = 3.0 * x[k] * x[k];
            return H;
          },
          [&](const DoubleWell&) -> Eigen::MatrixXd {
            Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
            for (Eigen::Index k = 0; k < n; ++k) H(k, k) = 3.0 * x[k] * x[k] - 1.0;
            return H;
          },
          [&](const DiscreteDirichlet&) -> Eigen::MatrixXd { return fd_hessian(spec, x); },
          [&](const QuantileEntropyPotential& qe) -> Eigen::MatrixXd {
            if (!quantile_monotone(x)) {
              throw DomainError("energy_hessian: quantile point is not increasing");
            }
            const double inv_m = 1.0 / static_cast<double>(n);
            Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
            for (Eigen::Index j = 0; j < n; ++j) H(j, j) = qe.v2 * inv_m;
            for (Eigen::Index j = 0; j + 1 < n; ++j) {
              const double gap = x[j + 1] - x[j];
              const double c = inv_m / (gap * gap);
              H(j, j) += c;
              H(j + 1, j + 1) += c;
              H(j, j + 1) -= c;
              H(j + 1, j) -= c;
            }
            return H;
          },
      },
      spec.kind);
}

double coercivity_bound(const EnergySpec& spec, const SpaceSpec& space,
                        std::span<const double> x) {
  const auto& c = spec.coercivity;
  if (c.B == 0.0) return c.A;
  std::vector<double> star = c.u_star;
  if (star.empty()) star.assign(x.size(), 0.0);
  return c.B * squared_distance(space, x, star) + c.A;
}

namespace {

double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

YosidaResult yosida_newton(const EnergySpec& spec, const SpaceSpec& space,
                           std::span<const double> x, double t) {
  const std::size_t n = x.size();
  const double w = space.weight();
  auto objective = [&](std::span<const double> y) {
    const double phi = energy_eval(spec, y);
    if (is_infinite_energy(phi)) return kInfiniteEnergy;
    return squared_distance(space, y, x) / (2.0 * t) + phi;
  };
  std::vector<double> y(x.begin(), x.end()), trial(n), g(n);
  double f = objective(y);
  std::vector<double> trace{f};
  for (int it = 0; it < 200; ++it) {
    energy_grad(spec, y, g);
    Eigen::VectorXd grad(n);
    for (std::size_t k = 0; k < n; ++k) grad[k] = g[k] + w * (y[k] - x[k]) / t;
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + std::abs(f))) {
      return {f, y, it};
    }
    Eigen::MatrixXd H = energy_hessian(spec, y);
    H.diagonal().array() += w / t;
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    Eigen::VectorXd step;
    if (llt.info() == Eigen::Success) {
      step = -llt.solve(grad);
    } else {
      // indefinite: gradient step in the metric
      step = -grad * (t / w);
    }
    double alpha = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < n; ++k) trial[k] = y[k] + alpha * step[k];
      const double ft = objective(trial);
      if (ft <= f + 1e-4 * alpha * grad.dot(step) ||
          (std::isfinite(ft) && ft <= f + 1e-15 * (1.0 + std::abs(f)) &&
           alpha == 1.0)) {
        y = trial;
        f = ft;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    trace.push_back(f);
    if (!moved || step.lpNorm<Eigen::Infinity>() * alpha <=
                      1e-15 * (1.0 + Eigen::Map<const Eigen::VectorXd>(y.data(), n)
                                         .lpNorm<Eigen::Infinity>())) {
      energy_grad(spec, y, g);
      double gmax = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        gmax = std::max(gmax, std::abs(g[k] + w * (y[k] - x[k]) / t));
      }
      if (gmax <= 1e-9 * (1.0 + std::abs(f))) return {f, y, it + 1};
      throw NumericError("yosida: Newton iteration stalled", trace);
    }
  }
  throw NumericError("yosida: Newton iteration did not converge", trace);
}

}  // namespace

YosidaResult yosida(const EnergySpec& spec, const SpaceSpec& space,
                    std::span<const double> x, double t) {
  if (!(t > 0.0)) throw InvalidInput("yosida: t must be positive");
  if (x.size() != static_cast<std::size_t>(space.dim())) {
    throw InvalidInput("yosida: dimension mismatch");
  }
  if (spec.lambda && *spec.lambda < 0.0 && !(t < 1.0 / (2.0 * std::abs(*spec.lambda)))) {
    throw InvalidInput("yosida: t must be below 1/(2|lambda|) for a lambda-convex energy");
  }
  if (is_infinite_energy(energy_eval(spec, x))) {
    throw DomainError("yosida: x outside the energy domain");
  }
  if (space.hilbertian()) {
    try {
      return yosida_newton(spec, space, x, t);
    } catch (const NumericError&) {
      if (x.size() != 1) throw;
    }
    // 1-D fallback: golden section on a bracket that contains the minimizer
    auto f = [&](double y) {
      const double yy[1] = {y};
      return squared_distance(space, yy, x) / (2.0 * t) + energy_eval(spec, yy);
    };
    double radius = 1.0 + std::abs(x[0]);
    while (f(x[0] - radius) <= f(x[0]) || f(x[0] + radius) <= f(x[0])) radius *= 2.0;
    const double y = golden_section(f, x[0] - radius, x[0] + radius, 1e-15);
    return {f(y), {y}, 0};
  }
  Objective obj = [&](std::span<const double> y, std::span<double> grad) {
    const double phi = energy_eval(spec, y);
    if (is_infinite_energy(phi)) return kInfiniteEnergy;
    energy_grad(spec, y, grad);
    std::vector<double> dg(y.size());
    squared_distance_grad(space, y, x, dg);
    for (std::size_t k = 0; k < y.size(); ++k) grad[k] += dg[k] / (2.0 * t);
    return squared_distance(space, y, x) / (2.0 * t) + phi;
  };
  LbfgsOptions opts;
  opts.grad_tol = 1e-12;
  opts.max_iter = 5000;
  auto res = minimize_lbfgs(obj, std::vector<double>(x.begin(), x.end()), opts);
  if (!res.converged && res.grad_norm > 1e-8) {
    throw NumericError("yosida: inner minimization failed: " + res.message, res.trace);
  }
  return {res.f, res.x, res.iterations};
}

std::string to_string(SlopeMethod method) {
  switch (method) {
    case SlopeMethod::analytic:
      return "analytic";
    case SlopeMethod::lambda_representation:
      return "lambda_representation";
    case SlopeMethod::yosida_duality:
      return "yosida_duality";
  }
  return "?";
}

SlopeEstimate local_slope(const EnergySpec& spec, const SpaceSpec& space,
                          std::span<const double> x, SlopeMethod method) {
  check_compatible(spec, space);
  const double phi_x = energy_eval(spec, x);
  if (is_infinite_energy(phi_x)) throw DomainError("local_slope: x outside D(phi)");
  SlopeEstimate est;
  est.method = method;
  switch (method) {
    case SlopeMethod::analytic: {
      est.value = dual_norm(space, energy_grad(spec, x));
      return est;
    }
    case SlopeMethod::yosida_duality: {
      std::vector<double> q;
      for (int k = 0; k <= 8; ++k) {
        const double t = 0.1 * std::ldexp(1.0, -k);
        const double quotient = (phi_x - yosida(spec, space, x, t).value) / t;
        if (!std::isfinite(quotient)) {
          throw NumericError("local_slope: non-finite Yosida quotient", q);
        }
        q.push_back(quotient);
        est.diagnostics.emplace_back(t, quotient);
      }
      const double d_first = std::abs(q[1] - q[0]);
      const double d_last = std::abs(q[8] - q[7]);
      if (d_last > d_first + 1e-12 * (1.0 + std::abs(q[8]))) {
        throw NumericError("local_slope: Yosida quotients do not settle", q);
      }
      est.last_quotient = q[8];
      est.richardson = 2.0 * q[8] - q[7];
      est.value = std::sqrt(2.0 * std::max(0.0, est.richardson));
      return est;
    }
    case SlopeMethod::lambda_representation: {
      if (!spec.lambda) {
        throw InvalidInput("lambda_representation needs a lambda-convex energy");
      }
      const double lambda = *spec.lambda;
      const std::size_t n = x.size();
      std::vector<std::vector<double>> dirs;
      for (std::size_t k = 0; k < n; ++k) {
        for (double sgn : {1.0, -1.0}) {
          std::vector<double> e(n, 0.0);
          e[k] = sgn;
          dirs.push_back(e);
        }
      }
      std::mt19937_64 rng(0x5eed);
      std::normal_distribution<double> normal;
      for (int r = 0; r < 8 && n > 1; ++r) {
        std::vector<double> e(n);
        for (auto& v : e) v = normal(rng);
        dirs.push_back(e);
      }
      try {
        auto g = energy_grad(spec, x);
        if (space.hilbertian()) {
          for (auto& v : g) v = -v / space.weight();
        } else {
          for (auto& v : g) v = -v;
        }
        dirs.push_back(g);
      } catch (const DomainError&) {
      }
      std::vector<double> zero(n, 0.0);
      for (auto& e : dirs) {
        const double len = distance(space, e, zero);
        if (len == 0.0) continue;
        for (auto& v : e) v /= len;
      }
      std::vector<double> v(n);
      double best = 0.0;
      for (int k = 0; k <= 24; ++k) {
        const double radius = std::ldexp(1.0, -k);
        double best_r = 0.0;
        for (const auto& e : dirs) {
          for (std::size_t i = 0; i < n; ++i) v[i] = x[i] + radius * e[i];
          if (!in_space(space, v)) continue;
          const double phi_v = energy_eval(spec, v);
          if (is_infinite_energy(phi_v)) continue;
          const double d = distance(space, x, v);
          if (d == 0.0) continue;
          const double quotient = (phi_x - phi_v) / d + 0.5 * lambda * d;
          best_r = std::max(best_r, quotient);
        }
        est.diagnostics.emplace_back(radius, best_r);
        best = std::max(best, best_r);
      }
      est.value = best;
      return est;
    }
  }
  return est;
}

}  // namespace wed
