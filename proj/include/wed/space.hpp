#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wed {

/// Finite-dimensional metric state space.
///
/// Quantile1D models probability measures on the real line through their
/// quantile functions sampled at s_j = (j - 1/2)/m. The 2-Wasserstein distance
/// then reduces to a weighted L2 distance of quantile vectors.
class SpaceSpec {
 public:
  enum class Kind { euclidean, pnorm, quantile1d };

  static SpaceSpec euclidean(int dim);
  static SpaceSpec pnorm(int dim, double p);
  static SpaceSpec quantile1d(int m);

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  double p() const noexcept { return p_; }

  /// True when the distance comes from an inner product <a,b> = w * sum a_k b_k.
  bool hilbertian() const noexcept;
  /// The weight w of the inner product; 1 for Euclidean, 1/m for quantiles.
  double weight() const noexcept;

  std::string name() const;
  std::size_t hash() const noexcept;

  bool operator==(const SpaceSpec&) const = default;

 private:
  SpaceSpec(Kind kind, int dim, double p) : kind_(kind), dim_(dim), p_(p) {}
  Kind kind_;
  int dim_;
  double p_;
};

/// A validated state: coordinates match the space dimension and quantile
/// vectors are strictly increasing.
class Point {
 public:
  Point(const SpaceSpec& space, std::vector<double> coords);

  const SpaceSpec& space() const noexcept { return space_; }
  std::span<const double> coords() const noexcept { return coords_; }
  const std::vector<double>& vec() const noexcept { return coords_; }
  std::size_t size() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }

 private:
  SpaceSpec space_;
  std::vector<double> coords_;
};

/// Whether raw coordinates describe a point of the space (dimension and,
/// for quantiles, strict monotonicity).
bool in_space(const SpaceSpec& space, std::span<const double> x) noexcept;

double distance(const SpaceSpec& space, std::span<const double> a,
                std::span<const double> b);
double distance(const Point& a, const Point& b);

double squared_distance(const SpaceSpec& space, std::span<const double> a,
                        std::span<const double> b);

/// Gradient of a -> d^2(a, b) with respect to a, written to `out`.
void squared_distance_grad(const SpaceSpec& space, std::span<const double> a,
                           std::span<const double> b, std::span<double> out);

/// Dual norm of a (Euclidean) differential: the metric slope of a linear
/// functional with coefficient vector `g`.
double dual_norm(const SpaceSpec& space, std::span<const double> g);

/// Constant-speed geodesic (1-theta) a + theta b. Linear segments are
/// geodesics in normed spaces and in quantile coordinates.
std::vector<double> geodesic_point(const SpaceSpec& space,
                                   std::span<const double> a,
                                   std::span<const double> b, double theta);
Point geodesic_point(const Point& a, const Point& b, double theta);

/// Quantiles of N(mean, sd^2) at the midpoint nodes of a Quantile1D space.
Point gaussian_quantiles(const SpaceSpec& space, double mean, double sd);

/// Standard normal quantile function.
double normal_quantile(double s);

}  // namespace wed
