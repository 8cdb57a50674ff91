#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "wed/space.hpp"

namespace wed {

/// Value used for points outside the effective domain of an energy. It is
/// +inf, so sums and weighted sums with finite terms stay infinite.
inline constexpr double kInfiniteEnergy = std::numeric_limits<double>::infinity();

inline bool is_infinite_energy(double v) noexcept { return v == kInfiniteEnergy; }

/// phi(x) = 1/2 x^T A x - b^T x
struct Quadratic {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

/// phi(x) = sum_k x_k^4 / 4
struct ConvexQuartic {};

/// phi(x) = sum_k (x_k^2 - 1)^2 / 4
struct DoubleWell {};

/// Discrete p-Dirichlet energy with reaction term on a uniform 1-D mesh with
/// homogeneous boundary values u_0 = u_{n+1} = 0:
///   phi(u) = sum_{k=0}^{n} h/p |(u_{k+1} - u_k)/h|^p + sum_{k=1}^{n} h F(u_k),
/// where F(z) = sum_j reaction[j] z^j.
struct DiscreteDirichlet {
  double p = 2.0;
  double h = 1.0;
  std::vector<double> reaction;
};

/// Potential energy plus entropy of a 1-D measure in quantile coordinates:
///   phi(Q) = 1/m sum_j V(Q_j) - 1/m sum_{j<m} log(m (Q_{j+1} - Q_j)),
/// with V(x) = v2 x^2 / 2 + v1 x.
struct QuantileEntropyPotential {
  double v2 = 1.0;
  double v1 = 0.0;
};

/// Constants of the quadratic lower bound phi(u) >= -B d^2(u, u_star) - A.
struct Coercivity {
  double A = 0.0;
  double B = 0.0;
  std::vector<double> u_star;
};

struct EnergySpec {
  std::variant<Quadratic, ConvexQuartic, DoubleWell, DiscreteDirichlet,
               QuantileEntropyPotential>
      kind;
  std::optional<double> lambda;  // geodesic convexity modulus, trusted metadata
  Coercivity coercivity;

  std::string kind_name() const;
  std::size_t hash() const;
};

/// Fixture constructors carrying the convexity moduli listed for each kind.
EnergySpec make_quadratic(Eigen::MatrixXd A, Eigen::VectorXd b);
EnergySpec make_scalar_quadratic(double a);
EnergySpec make_convex_quartic(int dim = 1);
EnergySpec make_double_well(int dim = 1);
EnergySpec make_discrete_dirichlet(double p, double h, std::vector<double> reaction,
                                   int dim);
EnergySpec make_quantile_entropy(double v2, double v1, int m);

/// Throws InvalidInput when the energy cannot act on points of `space`.
void check_compatible(const EnergySpec& spec, const SpaceSpec& space);

double energy_eval(const EnergySpec& spec, std::span<const double> x);
double energy_eval(const EnergySpec& spec, const Point& x);

/// Euclidean-coordinate gradient. Throws DomainError outside the domain.
std::vector<double> energy_grad(const EnergySpec& spec, std::span<const double> x);
void energy_grad(const EnergySpec& spec, std::span<const double> x,
                 std::span<double> out);

/// Hessian in coordinates; analytic where available, otherwise central
/// differences of the gradient.
Eigen::MatrixXd energy_hessian(const EnergySpec& spec, std::span<const double> x);

/// Q(x) = B d^2(x, u_star) + A.
double coercivity_bound(const EnergySpec& spec, const SpaceSpec& space,
                        std::span<const double> x);

struct YosidaResult {
  double value = 0.0;
  std::vector<double> argmin;
  int iterations = 0;
};

/// Moreau-Yosida regularization phi_t(x) = inf_y d^2(y,x)/(2t) + phi(y).
YosidaResult yosida(const EnergySpec& spec, const SpaceSpec& space,
                    std::span<const double> x, double t);

enum class SlopeMethod { analytic, lambda_representation, yosida_duality };

struct SlopeEstimate {
  double value = 0.0;
  SlopeMethod method = SlopeMethod::analytic;
  std::vector<std::pair<double, double>> diagnostics;  // (t or radius, quotient)
  double last_quotient = 0.0;
  double richardson = 0.0;
};

/// Local slope |d phi|(x) by one of three routes.
SlopeEstimate local_slope(const EnergySpec& spec, const SpaceSpec& space,
                          std::span<const double> x, SlopeMethod method);

std::string to_string(SlopeMethod method);

}  // namespace wed
