#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "betaens/common.hpp"

namespace betaens {

enum class ModelKind { euclidean, sphere };

/// Ambient model of the compact set: a box in R^n or a subset of the unit
/// sphere S^n in R^{n+1}. Spherical n is capped at 2 so that exact product
/// quadrature is available.
struct AmbientModel {
  ModelKind kind;
  int n;

  static AmbientModel euclidean(int n) {
    if (n < 1) throw config_error("euclidean model requires n >= 1");
    return {ModelKind::euclidean, n};
  }
  static AmbientModel sphere(int n) {
    if (n < 1 || n > 2) throw config_error("sphere model supports n in {1, 2}");
    return {ModelKind::sphere, n};
  }

  /// Dimension of the coordinate vectors points live in.
  int ambient_dim() const { return kind == ModelKind::euclidean ? n : n + 1; }

  bool operator==(const AmbientModel& o) const { return kind == o.kind && n == o.n; }
};

/// Axis-aligned box [lo_1, hi_1] x ... x [lo_n, hi_n].
struct Box {
  Vector lo;
  Vector hi;
};

/// Geodesic cap about the north pole (last coordinate axis); cap_angle = pi
/// means the full sphere.
struct SphereCap {
  double cap_angle = kPi;
  bool full() const { return cap_angle >= kPi - 1e-12; }
};

using Region = std::variant<Box, SphereCap>;

using ScalarField = std::function<double(const Vector&)>;

/// Weighted compact set: region K inside its ambient model together with a
/// continuous weight phi on K and its declared Hoelder regularity.
struct WeightedDomain {
  AmbientModel model;
  Region region;
  ScalarField phi;
  double phi_alpha = 1.0;
  std::string phi_label = "zero";
  std::string label = "domain";

  const Box& box() const { return std::get<Box>(region); }
  const SphereCap& cap() const { return std::get<SphereCap>(region); }

  bool is_full_sphere() const {
    return model.kind == ModelKind::sphere && std::holds_alternative<SphereCap>(region) &&
           cap().full();
  }
};

inline std::shared_ptr<const WeightedDomain> make_box_domain(
    int n, const Vector& lo, const Vector& hi, ScalarField phi = {},
    const std::string& phi_label = "zero", double phi_alpha = 1.0) {
  if (lo.size() != n || hi.size() != n) throw config_error("box bounds must have dimension n");
  for (int i = 0; i < n; ++i)
    if (!(lo[i] < hi[i])) throw config_error("box requires lo < hi in every coordinate");
  WeightedDomain d;
  d.model = AmbientModel::euclidean(n);
  d.region = Box{lo, hi};
  d.phi = phi ? std::move(phi) : [](const Vector&) { return 0.0; };
  d.phi_label = phi_label;
  d.phi_alpha = phi_alpha;
  d.label = "box" + std::to_string(n);
  return std::make_shared<const WeightedDomain>(std::move(d));
}

inline std::shared_ptr<const WeightedDomain> make_sphere_domain(
    int n, double cap_angle = kPi, ScalarField phi = {},
    const std::string& phi_label = "zero", double phi_alpha = 1.0) {
  if (!(cap_angle > 0.0) || cap_angle > kPi + 1e-12)
    throw config_error("cap angle must lie in (0, pi]");
  WeightedDomain d;
  d.model = AmbientModel::sphere(n);
  d.region = SphereCap{std::min(cap_angle, kPi)};
  d.phi = phi ? std::move(phi) : [](const Vector&) { return 0.0; };
  d.phi_label = phi_label;
  d.phi_alpha = phi_alpha;
  d.label = "sphere" + std::to_string(n);
  return std::make_shared<const WeightedDomain>(std::move(d));
}

/// Membership test, boundary inclusive. Exact for boxes and caps; points on a
/// sphere are accepted when their radius is within 1e-9 of 1.
inline bool contains(const WeightedDomain& domain, const Vector& x) {
  if (x.size() != domain.model.ambient_dim())
    throw config_error("point dimension does not match the ambient model");
  if (domain.model.kind == ModelKind::euclidean) {
    const Box& b = domain.box();
    for (Index i = 0; i < x.size(); ++i)
      if (x[i] < b.lo[i] || x[i] > b.hi[i]) return false;
    return true;
  }
  if (std::abs(x.norm() - 1.0) > 1e-9) return false;
  const SphereCap& c = domain.cap();
  if (c.full()) return true;
  return x[x.size() - 1] >= std::cos(c.cap_angle) - 1e-12;
}

/// Logarithm of the ambient metric factor carried by degree-p sections: for
/// the euclidean model -(p/2) log(1+|x|^2); the spherical factor is constant
/// on S^n and absorbed into the normalization, hence 0.
inline double metric_log_weight(const AmbientModel& model, int p, const Vector& x) {
  if (model.kind == ModelKind::sphere) return 0.0;
  return -0.5 * static_cast<double>(p) * std::log1p(x.squaredNorm());
}

/// Geodesic diameter of K (used to scale local proposal steps).
inline double diameter(const WeightedDomain& domain) {
  if (domain.model.kind == ModelKind::euclidean) {
    const Box& b = domain.box();
    return (b.hi - b.lo).norm();
  }
  return std::min(kPi, 2.0 * domain.cap().cap_angle);
}

/// Point on S^1 from its angle.
inline Vector circle_point(double theta) {
  Vector x(2);
  x << std::cos(theta), std::sin(theta);
  return x;
}

inline double circle_angle(const Vector& x) { return std::atan2(x[1], x[0]); }

/// Point on S^2 from height z in [-1,1] and azimuth.
inline Vector sphere2_point(double z, double azimuth) {
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  Vector x(3);
  x << r * std::cos(azimuth), r * std::sin(azimuth), z;
  return x;
}

/// Angle of the cap axis in the S^1 parameterization: the pole is the last
/// coordinate axis, i.e. theta = pi/2.
inline constexpr double kCirclePoleAngle = kPi / 2.0;

/// Deterministic covering grid of K with roughly `resolution` points
/// (exactly resolution for 1-d models). Rows are points.
inline Matrix domain_grid(const WeightedDomain& domain, long resolution) {
  if (resolution < 2) throw config_error("grid resolution must be at least 2");
  const AmbientModel& m = domain.model;
  if (m.kind == ModelKind::euclidean) {
    const Box& b = domain.box();
    const int n = m.n;
    const long per_dim = std::max<long>(2, static_cast<long>(std::llround(
                                               std::pow(static_cast<double>(resolution), 1.0 / n))));
    long total = 1;
    for (int i = 0; i < n; ++i) total *= per_dim;
    Matrix grid(total, n);
    for (long idx = 0; idx < total; ++idx) {
      long rest = idx;
      for (int i = 0; i < n; ++i) {
        const long k = rest % per_dim;
        rest /= per_dim;
        grid(idx, i) = b.lo[i] + (b.hi[i] - b.lo[i]) * static_cast<double>(k) / (per_dim - 1);
      }
    }
    return grid;
  }
  const SphereCap& c = domain.cap();
  if (m.n == 1) {
    Matrix grid(resolution, 2);
    if (c.full()) {
      for (long k = 0; k < resolution; ++k) {
        const double th = 2.0 * kPi * static_cast<double>(k) / resolution;
        grid.row(k) = circle_point(th).transpose();
      }
    } else {
      for (long k = 0; k < resolution; ++k) {
        const double th = kCirclePoleAngle - c.cap_angle +
                          2.0 * c.cap_angle * static_cast<double>(k) / (resolution - 1);
        grid.row(k) = circle_point(th).transpose();
      }
    }
    return grid;
  }
  // S^2: product grid in height and azimuth, area-balanced.
  const double z_min = c.full() ? -1.0 : std::cos(c.cap_angle);
  const long nz = std::max<long>(2, static_cast<long>(std::llround(std::sqrt(resolution / 2.0))));
  const long na = std::max<long>(4, 2 * nz);
  Matrix grid(nz * na, 3);
  for (long i = 0; i < nz; ++i) {
    const double z = z_min + (1.0 - z_min) * (static_cast<double>(i) + 0.5) / nz;
    for (long j = 0; j < na; ++j) {
      const double az = 2.0 * kPi * static_cast<double>(j) / na;
      grid.row(i * na + j) = sphere2_point(z, az).transpose();
    }
  }
  return grid;
}

}  // namespace betaens
