#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "betaens/common.hpp"
#include "betaens/geometry.hpp"

namespace betaens {

/// Nodes (rows) and weights of a cubature rule; weights sum to the surface
/// (or Lebesgue) mass of the region.
struct QuadratureRule {
  Matrix nodes;
  Vector weights;
  std::string spec;

  Index size() const { return weights.size(); }
};

/// Gauss-Legendre nodes and weights on [-1, 1]; exact for polynomials of
/// degree <= 2m - 1. Newton iteration on the Legendre recurrence.
inline std::pair<Vector, Vector> gauss_legendre(int m) {
  Vector x(m), w(m);
  const int half = (m + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (m + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int k = 0; k < m; ++k) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * k + 1.0) * z * p2 - k * p3) / (k + 1.0);
      }
      pp = m * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[m - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[m - 1 - i] = w[i];
  }
  return {x, w};
}

inline std::pair<Vector, Vector> gauss_legendre(int m, double a, double b) {
  auto [x, w] = gauss_legendre(m);
  const double mid = 0.5 * (a + b), rad = 0.5 * (b - a);
  for (int i = 0; i < m; ++i) {
    x[i] = mid + rad * x[i];
    w[i] *= rad;
  }
  return {x, w};
}

/// Product Gauss-Legendre rule on a box, exact for total degree <= `degree`.
inline QuadratureRule box_rule(const Box& b, int degree) {
  const int n = static_cast<int>(b.lo.size());
  const int m = degree / 2 + 1;
  std::vector<std::pair<Vector, Vector>> axes;
  axes.reserve(n);
  for (int i = 0; i < n; ++i) axes.push_back(gauss_legendre(m, b.lo[i], b.hi[i]));
  long total = 1;
  for (int i = 0; i < n; ++i) total *= m;
  Matrix nodes(total, n);
  Vector weights(total);
  for (long idx = 0; idx < total; ++idx) {
    long rest = idx;
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      const long k = rest % m;
      rest /= m;
      nodes(idx, i) = axes[i].first[k];
      w *= axes[i].second[k];
    }
    weights[idx] = w;
  }
  return {std::move(nodes), std::move(weights), "gl" + std::to_string(m) + "^" + std::to_string(n)};
}

/// Rule on S^1 (arclength measure). Full circle: equispaced trapezoid, exact
/// for trigonometric degree <= `degree`. Caps: Gauss-Legendre on the angle
/// with a node margin that drives the error of trigonometric integrands far
/// below 1e-12.
inline QuadratureRule circle_rule(const SphereCap& c, int degree) {
  if (c.full()) {
    const long m = degree + 1;
    Matrix nodes(m, 2);
    Vector weights = Vector::Constant(m, 2.0 * kPi / m);
    for (long k = 0; k < m; ++k)
      nodes.row(k) = circle_point(2.0 * kPi * static_cast<double>(k) / m).transpose();
    return {std::move(nodes), std::move(weights), "trap" + std::to_string(m)};
  }
  const int m = degree + 24;
  auto [t, w] = gauss_legendre(m, kCirclePoleAngle - c.cap_angle, kCirclePoleAngle + c.cap_angle);
  Matrix nodes(m, 2);
  for (int k = 0; k < m; ++k) nodes.row(k) = circle_point(t[k]).transpose();
  return {std::move(nodes), Vector(w), "glarc" + std::to_string(m)};
}

/// Rule on S^2 (surface measure dz x dazimuth): Gauss-Legendre in the height
/// times trapezoid in the azimuth; exact for polynomials restricted to the
/// sphere of total degree <= `degree`, on full spheres and polar caps alike.
inline QuadratureRule sphere2_rule(const SphereCap& c, int degree) {
  const double z_min = c.full() ? -1.0 : std::cos(c.cap_angle);
  const int mz = degree / 2 + 2;
  const long ma = degree + 1;
  auto [z, wz] = gauss_legendre(mz, z_min, 1.0);
  Matrix nodes(mz * ma, 3);
  Vector weights(mz * ma);
  const double wa = 2.0 * kPi / ma;
  for (int i = 0; i < mz; ++i)
    for (long j = 0; j < ma; ++j) {
      nodes.row(i * ma + j) = sphere2_point(z[i], wa * j).transpose();
      weights[i * ma + j] = wz[i] * wa;
    }
  return {std::move(nodes), std::move(weights),
          "glz" + std::to_string(mz) + "xtrap" + std::to_string(ma)};
}

/// Surface rule on K exact (boxes, S^2) or near-exact (S^1 caps) for
/// polynomial integrands of total degree <= `degree`.
inline QuadratureRule surface_rule(const WeightedDomain& domain, int degree) {
  if (domain.model.kind == ModelKind::euclidean) return box_rule(domain.box(), degree);
  if (domain.model.n == 1) return circle_rule(domain.cap(), degree);
  return sphere2_rule(domain.cap(), degree);
}

}  // namespace betaens
