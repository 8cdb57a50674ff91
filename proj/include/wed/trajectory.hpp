#pragma once

#include <functional>
#include <span>
#include <vector>

#include "wed/space.hpp"

namespace wed {

enum class GridMode { uniform, exp_graded };

/// Increasing time nodes 0 = t_0 < ... < t_N = T.
struct TimeGrid {
  std::vector<double> nodes;
  GridMode mode = GridMode::uniform;

  int cells() const noexcept { return static_cast<int>(nodes.size()) - 1; }
  double horizon() const noexcept { return nodes.back(); }
  double step(int i) const noexcept { return nodes[i + 1] - nodes[i]; }
};

TimeGrid uniform_grid(double T, int N);

/// Nodes carrying equal exponential-measure mass:
/// t_i = -eps log(1 - (i/N)(1 - exp(-T/eps))).
TimeGrid exp_graded_grid(double eps, double T, int N);

TimeGrid make_grid(GridMode mode, double eps, double T, int N);

/// Throws InvalidInput unless nodes start at 0 and strictly increase.
void validate_grid(const TimeGrid& grid);

/// Cell masses of mu_eps = exp(-t/eps)/eps dt in closed form, and the mass
/// exp(-T/eps) of the tail [T, inf).
struct Weights {
  std::vector<double> masses;
  double tail = 0.0;
  double epsilon = 0.0;
};

Weights make_weights(const TimeGrid& grid, double eps);

/// Discrete curve: one point per grid node, stored node-major.
class Trajectory {
 public:
  Trajectory(SpaceSpec space, TimeGrid grid, std::vector<double> data);

  const SpaceSpec& space() const noexcept { return space_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  int cells() const noexcept { return grid_.cells(); }
  int dim() const noexcept { return space_.dim(); }
  std::span<const double> at(int i) const noexcept {
    return {data_.data() + static_cast<std::size_t>(i) * space_.dim(),
            static_cast<std::size_t>(space_.dim())};
  }
  Point point(int i) const { return Point(space_, {at(i).begin(), at(i).end()}); }
  const std::vector<double>& data() const noexcept { return data_; }

  static Trajectory constant(const Point& x, TimeGrid grid);

 private:
  SpaceSpec space_;
  TimeGrid grid_;
  std::vector<double> data_;
};

/// Per-cell metric speed d(u_i, u_{i+1}) / (t_{i+1} - t_i).
std::vector<double> metric_speed(const Trajectory& traj);

/// Total length sum_i d(u_i, u_{i+1}).
double curve_length(const Trajectory& traj);

using ScalarField = std::function<double(std::span<const double>)>;

/// Resamples the curve at unit speed on [0, L] with the same number of cells.
Trajectory arclength_reparam(const Trajectory& traj);

/// Resamples the curve on [0, S], S = int |u'|/g dt, so that |theta'| = g(theta).
Trajectory g_reparam(const Trajectory& traj, const ScalarField& g);

/// The four integrals that coincide for a g-reparametrized curve:
/// int g^2 ds, int |theta'|^2 ds, int g |theta'| ds and the product form
/// int g(u)|u'| dt of the original curve.
struct ReparamIntegrals {
  double g_squared = 0.0;
  double speed_squared = 0.0;
  double g_times_speed = 0.0;
  double original = 0.0;
  double max_relative_gap() const;
};

ReparamIntegrals reparam_integrals(const Trajectory& original,
                                   const Trajectory& reparametrized,
                                   const ScalarField& g);

/// |w(0) + eps int_0^T w' dmu - w(T) exp(-T/eps) - int_0^T w dmu| with
/// exact per-cell integrals of w' and left-node sampling of w.
double weighted_ibp_check(const TimeGrid& grid, std::span<const double> w, double eps);

struct SpectralResult {
  double lhs = 0.0;  // int |w'|^2 dmu
  double rhs = 0.0;  // 1/(4 eps^2) int |w|^2 dmu
  double ratio = 0.0;
};

/// Weighted Poincare quotient for the piecewise-linear interpolant of w,
/// integrated exactly against mu_eps on each cell. Requires w(0) = 0.
SpectralResult spectral_check(const TimeGrid& grid, std::span<const double> w, double eps);

}  // namespace wed
