#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "betaens/common.hpp"
#include "betaens/geometry.hpp"
#include "betaens/quadrature.hpp"
#include "betaens/rng.hpp"

namespace betaens {

struct MassDensityParams {
  double c;
  double rho;
};

/// Base probability measure on K. The user supplies a relative density with
/// respect to the normalized uniform measure on K ("1" gives the normalized
/// restriction of the surface/Lebesgue measure); the constructor computes the
/// normalizer so the measure has mass one.
struct BaseMeasure {
  std::shared_ptr<const WeightedDomain> domain;
  ScalarField density;       // relative, unnormalized
  double density_sup = 1.0;  // finite upper bound of `density` on K
  int density_poly_degree = 0;  // -1 when not polynomial (forces Monte-Carlo Grams)
  double surface_mass = 0.0;    // |K| under the model's surface measure
  double normalizer = 1.0;      // integral of `density` d(uniform on K)
  std::optional<MassDensityParams> mass_density;
  std::string label = "uniform";

  /// Normalized density with respect to the uniform probability measure on K.
  double relative_density(const Vector& x) const { return density(x) / normalizer; }
};

inline BaseMeasure make_base_measure(std::shared_ptr<const WeightedDomain> domain,
                                     ScalarField density, double density_sup,
                                     int density_poly_degree, std::string label,
                                     std::optional<MassDensityParams> mass_density = {}) {
  BaseMeasure mu;
  mu.domain = std::move(domain);
  mu.density = density ? std::move(density) : [](const Vector&) { return 1.0; };
  mu.density_sup = density_sup;
  mu.density_poly_degree = density_poly_degree;
  mu.mass_density = mass_density;
  mu.label = std::move(label);
  const int norm_degree = std::max(48, 2 * std::max(0, density_poly_degree) + 8);
  QuadratureRule rule = surface_rule(*mu.domain, norm_degree);
  mu.surface_mass = rule.weights.sum();
  double z = 0.0;
  for (Index k = 0; k < rule.size(); ++k)
    z += rule.weights[k] * mu.density(rule.nodes.row(k).transpose());
  z /= mu.surface_mass;
  if (!(z > 0.0) || !std::isfinite(z))
    throw numerical_error("base measure density integrates to a non-positive value");
  mu.normalizer = z;
  return mu;
}

inline BaseMeasure uniform_measure(std::shared_ptr<const WeightedDomain> domain) {
  return make_base_measure(std::move(domain), {}, 1.0, 0, "uniform");
}

/// Quadrature rule whose weights integrate against mu (total weight 1): the
/// surface rule of the requested polynomial exactness times the normalized
/// density. Exact when `degree` covers integrand degree + density degree.
inline QuadratureRule measure_rule(const BaseMeasure& mu, int degree) {
  QuadratureRule rule = surface_rule(*mu.domain, degree + std::max(0, mu.density_poly_degree));
  const double scale = 1.0 / (mu.surface_mass * mu.normalizer);
  for (Index k = 0; k < rule.size(); ++k)
    rule.weights[k] *= scale * mu.density(rule.nodes.row(k).transpose());
  rule.spec += "*" + mu.label;
  return rule;
}

/// Uniform draw from K under the surface measure.
inline Vector sample_uniform_region(const WeightedDomain& domain, Rng& rng) {
  if (domain.model.kind == ModelKind::euclidean) {
    const Box& b = domain.box();
    Vector x(b.lo.size());
    for (Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(b.lo[i], b.hi[i]);
    return x;
  }
  const SphereCap& c = domain.cap();
  if (domain.model.n == 1) {
    const double th = c.full() ? rng.uniform(0.0, 2.0 * kPi)
                               : kCirclePoleAngle + rng.uniform(-c.cap_angle, c.cap_angle);
    return circle_point(th);
  }
  const double z_min = c.full() ? -1.0 : std::cos(c.cap_angle);
  return sphere2_point(rng.uniform(z_min, 1.0), rng.uniform(0.0, 2.0 * kPi));
}

/// Draw from mu by rejection against the uniform measure on K.
inline Vector sample_base(const BaseMeasure& mu, Rng& rng) {
  const long budget = 1000 + 100 * static_cast<long>(std::ceil(mu.density_sup));
  for (long attempt = 0; attempt < budget; ++attempt) {
    Vector x = sample_uniform_region(*mu.domain, rng);
    if (mu.density(x) >= rng.uniform() * mu.density_sup) return x;
  }
  throw numerical_error("sample_base: rejection budget exhausted (check density_sup)");
}

/// Verifies mu(B(x, r)) >= c r^rho for r in {2^-k} on a covering grid, down
/// to the resolution the quadrature supports. Returns false on the first
/// violated (x, r) pair.
inline bool check_mass_density(const BaseMeasure& mu, int max_k = 6, long grid_resolution = 64) {
  if (!mu.mass_density) return true;
  const auto [c, rho] = *mu.mass_density;
  const Matrix grid = domain_grid(*mu.domain, grid_resolution);
  QuadratureRule rule = measure_rule(mu, 64);
  // smallest radius the rule can still see
  double min_r = 1.0;
  for (int k = 1; k <= max_k; ++k) min_r = std::pow(2.0, -k);
  for (Index g = 0; g < grid.rows(); ++g) {
    const Vector x = grid.row(g).transpose();
    for (int k = 1; k <= max_k; ++k) {
      const double r = std::pow(2.0, -k);
      double ball_mass = 0.0;
      long hits = 0;
      for (Index q = 0; q < rule.size(); ++q) {
        if ((rule.nodes.row(q).transpose() - x).norm() <= r) {
          ball_mass += rule.weights[q];
          ++hits;
        }
      }
      if (hits < 2) break;  // below quadrature resolution
      if (ball_mass < c * std::pow(r, rho)) return false;
    }
  }
  return true;
}

}  // namespace betaens
