#include "wed/space.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "wed/error.hpp"

namespace wed {

namespace {

void require_same_dim(const SpaceSpec& space, std::span<const double> a,
                      std::span<const double> b) {
  const auto n = static_cast<std::size_t>(space.dim());
  if (a.size() != n || b.size() != n) {
    throw InvalidInput("dimension mismatch: space " + space.name() +
                       " expects " + std::to_string(n) + " coordinates, got " +
                       std::to_string(a.size()) + " and " +
                       std::to_string(b.size()));
  }
}

double pnorm_of_diff(double p, std::span<const double> a,
                     std::span<const double> b) {
  double scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    scale = std::max(scale, std::abs(a[k] - b[k]));
  }
  if (scale == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sum += std::pow(std::abs(a[k] - b[k]) / scale, p);
  }
  return scale * std::pow(sum, 1.0 / p);
}

}  // namespace

SpaceSpec SpaceSpec::euclidean(int dim) {
  if (dim < 1) throw InvalidInput("euclidean space needs dim >= 1");
  return SpaceSpec(Kind::euclidean, dim, 2.0);
}

SpaceSpec SpaceSpec::pnorm(int dim, double p) {
  if (dim < 1) throw InvalidInput("pnorm space needs dim >= 1");
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw InvalidInput("pnorm space needs 1 < p < inf");
  }
  return SpaceSpec(Kind::pnorm, dim, p);
}

SpaceSpec SpaceSpec::quantile1d(int m) {
  if (m < 1) throw InvalidInput("quantile1d space needs m >= 1");
  return SpaceSpec(Kind::quantile1d, m, 2.0);
}

bool SpaceSpec::hilbertian() const noexcept {
  return kind_ != Kind::pnorm || p_ == 2.0;
}

double SpaceSpec::weight() const noexcept {
  return kind_ == Kind::quantile1d ? 1.0 / dim_ : 1.0;
}

std::string SpaceSpec::name() const {
  switch (kind_) {
    case Kind::euclidean:
      return "euclidean(" + std::to_string(dim_) + ")";
    case Kind::pnorm:
      return "pnorm(" + std::to_string(dim_) + ", p=" + std::to_string(p_) +
             ")";
    case Kind::quantile1d:
      return "quantile1d(" + std::to_string(dim_) + ")";
  }
  return "?";
}

std::size_t SpaceSpec::hash() const noexcept {
  std::size_t h = std::hash<int>{}(static_cast<int>(kind_));
  h ^= std::hash<int>{}(dim_) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= std::hash<double>{}(p_) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

Point::Point(const SpaceSpec& space, std::vector<double> coords)
    : space_(space), coords_(std::move(coords)) {
  if (coords_.size() != static_cast<std::size_t>(space_.dim())) {
    throw InvalidInput("point has " + std::to_string(coords_.size()) +
                       " coordinates, space " + space_.name() + " needs " +
                       std::to_string(space_.dim()));
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) throw InvalidInput("point has non-finite coordinate");
  }
  if (!in_space(space_, coords_)) {
    throw InvalidInput("quantile point must be strictly increasing");
  }
}

bool in_space(const SpaceSpec& space, std::span<const double> x) noexcept {
  if (x.size() != static_cast<std::size_t>(space.dim())) return false;
  if (space.kind() == SpaceSpec::Kind::quantile1d) {
    for (std::size_t j = 1; j < x.size(); ++j) {
      if (!(x[j] > x[j - 1])) return false;
    }
  }
  return true;
}

double squared_distance(const SpaceSpec& space, std::span<const double> a,
                        std::span<const double> b) {
  require_same_dim(space, a, b);
  if (space.hilbertian()) {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = a[k] - b[k];
      sum += d * d;
    }
    return space.weight() * sum;
  }
  const double d = pnorm_of_diff(space.p(), a, b);
  return d * d;
}

double distance(const SpaceSpec& space, std::span<const double> a,
                std::span<const double> b) {
  require_same_dim(space, a, b);
  if (space.hilbertian()) return std::sqrt(squared_distance(space, a, b));
  return pnorm_of_diff(space.p(), a, b);
}

double distance(const Point& a, const Point& b) {
  if (!(a.space() == b.space())) throw InvalidInput("points live in different spaces");
  return distance(a.space(), a.coords(), b.coords());
}

void squared_distance_grad(const SpaceSpec& space, std::span<const double> a,
                           std::span<const double> b, std::span<double> out) {
  require_same_dim(space, a, b);
  if (space.hilbertian()) {
    const double w2 = 2.0 * space.weight();
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = w2 * (a[k] - b[k]);
    return;
  }
  // d/da ||a-b||_p^2 = 2 ||z||_p^{2-p} sign(z)|z|^{p-1}
  const double p = space.p();
  const double norm = pnorm_of_diff(p, a, b);
  if (norm == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double z = a[k] - b[k];
    const double r = std::abs(z) / norm;
    out[k] = 2.0 * norm * std::copysign(std::pow(r, p - 1.0), z);
  }
}

double dual_norm(const SpaceSpec& space, std::span<const double> g) {
  if (g.size() != static_cast<std::size_t>(space.dim())) {
    throw InvalidInput("dual_norm: dimension mismatch");
  }
  if (space.hilbertian()) {
    double sum = 0.0;
    for (double v : g) sum += v * v;
    return std::sqrt(sum / space.weight());
  }
  const double q = space.p() / (space.p() - 1.0);
  std::vector<double> zero(g.size(), 0.0);
  return pnorm_of_diff(q, g, zero);
}

std::vector<double> geodesic_point(const SpaceSpec& space,
                                   std::span<const double> a,
                                   std::span<const double> b, double theta) {
  require_same_dim(space, a, b);
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw InvalidInput("geodesic parameter must lie in [0,1]");
  }
  if (theta == 0.0) return {a.begin(), a.end()};
  if (theta == 1.0) return {b.begin(), b.end()};
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    out[k] = (1.0 - theta) * a[k] + theta * b[k];
  }
  return out;
}

Point geodesic_point(const Point& a, const Point& b, double theta) {
  if (!(a.space() == b.space())) throw InvalidInput("points live in different spaces");
  return Point(a.space(), geodesic_point(a.space(), a.coords(), b.coords(), theta));
}

double normal_quantile(double s) {
  if (!(s > 0.0 && s < 1.0)) throw InvalidInput("normal_quantile needs 0 < s < 1");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, s);
}

Point gaussian_quantiles(const SpaceSpec& space, double mean, double sd) {
  if (space.kind() != SpaceSpec::Kind::quantile1d) {
    throw InvalidInput("gaussian_quantiles needs a quantile1d space");
  }
  if (!(sd > 0.0)) throw InvalidInput("gaussian_quantiles needs sd > 0");
  const int m = space.dim();
  std::vector<double> q(m);
  for (int j = 0; j < m; ++j) {
    q[j] = mean + sd * normal_quantile((j + 0.5) / m);
  }
  return Point(space, std::move(q));
}

}  // namespace wed
