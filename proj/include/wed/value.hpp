#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "wed/energy.hpp"
#include "wed/space.hpp"
#include "wed/trajectory.hpp"
#include "wed/wed.hpp"

namespace wed {

/// Discretization used for value-function samples. The default grid is
/// exp-graded on [0, 25 eps], which depends on t only through t/eps.
struct ValueOptions {
  double horizon_factor = 25.0;
  int N = 1000;
  GridMode grid_mode = GridMode::exp_graded;
  Solver solver = Solver::direct;
  double grad_tol = 1e-10;
  int max_iter = 20000;
  Preconditioning preconditioning = Preconditioning::kinetic;
  int jobs = 1;

  std::size_t hash() const;
};

struct ValueSample {
  Point x;
  double epsilon = 0.0;
  double V = 0.0;
  double G = 0.0;
  double phi = 0.0;
  std::shared_ptr<const WedSolution> solution;
};

/// Thread-safe LRU cache of value samples with insert-if-absent semantics.
class ValueCache {
 public:
  explicit ValueCache(std::size_t capacity = 4096) : capacity_(capacity) {}

  struct Key {
    std::size_t energy, space, options;
    std::uint64_t eps_bits;
    std::vector<long long> x;
    auto operator<=>(const Key&) const = default;
  };
  static Key make_key(const EnergySpec& e, const SpaceSpec& s, std::span<const double> x,
                      double eps, const ValueOptions& opts);

  std::shared_ptr<const ValueSample> find(const Key& key);
  /// Returns the stored entry, which is `value` unless another one was present.
  std::shared_ptr<const ValueSample> insert(const Key& key, std::shared_ptr<const ValueSample> value);
  std::size_t size() const;
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  using Entry = std::pair<Key, std::shared_ptr<const ValueSample>>;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> order_;
  std::map<Key, std::list<Entry>::iterator> index_;
  std::size_t hits_ = 0, misses_ = 0;
};

WedProblem value_problem(const EnergySpec& energy, const SpaceSpec& space, const Point& x,
                         double eps, const ValueOptions& opts);

/// V_eps(x) via a WED solve, with G = sqrt(2 max(0, phi - V)/eps). Throws
/// NumericError if phi(x) >= V >= -Q(x) fails beyond 1e-8 (1 + |phi(x)|).
ValueSample value_function(const EnergySpec& energy, const SpaceSpec& space, const Point& x,
                           double eps, const ValueOptions& opts = {}, ValueCache* cache = nullptr);

/// V_eps(u(t_i)) read from the tail of a solution:
///   V_N = phi(u_N), V_i = (1 - e^{-dt/eps}) l_i + e^{-dt/eps} V_{i+1},
/// with V_0 set to the objective.
std::vector<double> value_along(const WedSolution& sol);

struct IdentityReport {
  std::string name;
  std::vector<double> residuals;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<std::pair<std::string, double>> details;

  void finish();  // sets max_residual and pass
  double detail(const std::string& key) const;
};

/// Dynamic programming: V(x) against partial cost + e^{-t_k/eps} V(u(t_k))
/// with V(u(t_k)) from a fresh solve, for the nodes closest to each horizon.
IdentityReport check_dpp(const ValueSample& sample, const EnergySpec& energy,
                         const std::vector<double>& horizons, const ValueOptions& opts,
                         ValueCache* cache = nullptr, double tolerance = 5e-3);

/// Per-cell residuals of -dV/dt = |u'|^2/2 + (phi - V)/eps and of
/// V = phi - eps/2 |u'|^2 (finite-T corrected), plus the cumulative energy
/// identity; all relative to the largest right-hand side.
IdentityReport check_fundamental_identity(const WedSolution& sol, const EnergySpec& energy,
                                          double tolerance = 5e-2);

/// V at every x and eps (eps strictly decreasing): V must not decrease as
/// eps decreases and must stay below phi.
IdentityReport check_eps_monotonicity(const EnergySpec& energy, const SpaceSpec& space,
                                      const std::vector<Point>& xs,
                                      const std::vector<double>& eps_list,
                                      const ValueOptions& opts = {}, ValueCache* cache = nullptr,
                                      double tolerance = 1e-6);

/// int_0^T phi_t(x) dmu_eps - 2 Q(x) e^{-T/eps} <= V(x); T is the largest
/// admissible horizon (1/(4B), and below 1/(2|lambda|) for lambda < 0).
/// residual = max(0, rhs - V); detail "margin" = V - rhs.
IdentityReport check_yosida_bound(const EnergySpec& energy, const SpaceSpec& space,
                                  const Point& x, double eps, const ValueOptions& opts = {},
                                  int quadrature_points = 2000, ValueCache* cache = nullptr,
                                  double tolerance = 0.0);

/// G_eps(x) <= |dphi|(x) + upper_tol over the sweep and
/// |G_{eps_min} - |dphi|(x)| <= final_tol.
IdentityReport wed_slope_compare(const EnergySpec& energy, const SpaceSpec& space,
                                 const Point& x, const std::vector<double>& eps_list,
                                 const ValueOptions& opts = {}, ValueCache* cache = nullptr,
                                 double upper_tol = 1e-2, double final_tol = 5e-2);

struct ProbeOptions {
  double h0 = 0.1;
  int levels = 6;  // h = h0 2^{-k}, k < levels
  int random_directions = 8;
  std::uint64_t seed = 20240611;
  int along_nodes = 3;
};

struct SlopeProbe {
  double estimate = 0.0;
  double last_quotient = 0.0;
  std::vector<std::pair<double, double>> quotients;  // (h, max over directions)
};

/// Probe estimate of the phi-conditioned slope of V_eps at x.
SlopeProbe probe_value_slope(const EnergySpec& energy, const SpaceSpec& space, const Point& x,
                             double eps, const ProbeOptions& probe, const ValueOptions& opts,
                             ValueCache* cache = nullptr);

/// (phi - V)/eps = |dV|^2/2 at x, reported as |probe - G|/max(G, floor); the
/// gradient-flow identity for V along the minimizer is checked at a few nodes.
IdentityReport check_hj(const EnergySpec& energy, const SpaceSpec& space, const Point& x,
                        double eps, const ProbeOptions& probe = {}, const ValueOptions& opts = {},
                        ValueCache* cache = nullptr, double tolerance = 5e-2);

struct FinslerOptions {
  int cells = 200;
  double S_tol = 1e-7;
  double grad_tol = 1e-11;
};

struct FinslerResult {
  double distance = 0.0;       // min over S of the Lagrangian action
  double horizon = 0.0;        // optimal S
  double product_form = 0.0;   // int f|theta'| after reparametrization by f
  double base_distance = 0.0;  // d(u0, u1)
  std::vector<double> curve;   // node-major, cells + 1 points
};

/// Finsler distance for a weight f >= 1 via the free-horizon action
///   inf_S inf_theta int_0^S (|theta'|^2 + f(theta)^2)/2 ds.
FinslerResult finsler_distance(const SpaceSpec& space, const ScalarField& f, const Point& u0,
                               const Point& u1, const FinslerOptions& opts = {});

/// f = sqrt(max(1, phi)).
ScalarField finsler_weight(const EnergySpec& energy);

}  // namespace wed
