#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "betaens/common.hpp"
#include "betaens/geometry.hpp"
#include "betaens/measure.hpp"
#include "betaens/quadrature.hpp"
#include "betaens/rng.hpp"

namespace betaens {

inline long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Dimension of the space of degree-p sections for each ambient model.
inline int section_space_dim(const AmbientModel& model, int p) {
  if (model.kind == ModelKind::euclidean) return static_cast<int>(binomial(p + model.n, model.n));
  return model.n == 1 ? 2 * p + 1 : (p + 1) * (p + 1);
}

/// Exponent tuples of total degree <= p in n variables, graded lexicographic.
inline std::vector<std::vector<int>> monomial_exponents(int n, int p) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(n, 0);
  for (int deg = 0; deg <= p; ++deg) {
    // enumerate compositions of `deg` into n parts, lexicographic
    std::fill(e.begin(), e.end(), 0);
    e[0] = deg;
    while (true) {
      out.push_back(e);
      int i = n - 2;
      while (i >= 0 && e[i] == 0) --i;
      if (i < 0) break;
      --e[i];
      int tail = 0;
      for (int j = i + 1; j < n; ++j) {
        tail += e[j];
        e[j] = 0;
      }
      e[i + 1] = tail + 1;
    }
  }
  return out;
}

/// Finite-dimensional realization of the degree-p section space as weighted
/// polynomial evaluations. `eval_raw` produces the raw basis values at a
/// point; `transform` (lower triangular, applied on the left) carries an
/// optional orthonormalizing change of basis.
struct SectionBasis {
  AmbientModel model;
  int p = 1;
  int n_p = 0;
  std::function<void(const Vector&, Vector&)> eval_raw;
  std::optional<Matrix> transform;
  std::string realization;
  std::string orth_tag;  // provenance of the orthonormalization, empty if none

  Vector raw(const Vector& x) const {
    Vector v(n_p);
    eval_raw(x, v);
    return v;
  }
};

namespace detail {

/// Deterministic well-spread points for rank checks and pivot selection.
inline Matrix probe_points(const AmbientModel& model, long count) {
  constexpr double golden = 0.6180339887498949;
  Matrix pts(count, model.ambient_dim());
  if (model.kind == ModelKind::sphere && model.n == 1) {
    for (long k = 0; k < count; ++k) {
      const double u = std::fmod(static_cast<double>(k) * golden + 0.5 / count, 1.0);
      pts.row(k) = circle_point(2.0 * kPi * u).transpose();
    }
    return pts;
  }
  if (model.kind == ModelKind::sphere) {
    for (long k = 0; k < count; ++k) {  // Fibonacci sphere
      const double z = 1.0 - 2.0 * (k + 0.5) / count;
      const double az = 2.0 * kPi * std::fmod(static_cast<double>(k) * golden, 1.0);
      pts.row(k) = sphere2_point(z, az).transpose();
    }
    return pts;
  }
  // Halton points in [-1, 1]^n
  const int bases[] = {2, 3, 5, 7, 11, 13};
  for (long k = 0; k < count; ++k)
    for (int d = 0; d < model.n; ++d) {
      double f = 1.0, r = 0.0;
      long idx = k + 1;
      const int b = bases[d % 6];
      while (idx > 0) {
        f /= b;
        r += f * (idx % b);
        idx /= b;
      }
      pts(k, d) = 2.0 * r - 1.0;
    }
  return pts;
}

inline Matrix eval_monomials(const std::vector<std::vector<int>>& exps, const Matrix& pts) {
  Matrix a(pts.rows(), static_cast<Index>(exps.size()));
  for (Index r = 0; r < pts.rows(); ++r)
    for (std::size_t j = 0; j < exps.size(); ++j) {
      double v = 1.0;
      for (std::size_t d = 0; d < exps[j].size(); ++d)
        for (int e = 0; e < exps[j][d]; ++e) v *= pts(r, static_cast<Index>(d));
      a(r, static_cast<Index>(j)) = v;
    }
  return a;
}

}  // namespace detail

/// Raw basis of the degree-p section space.
///
/// euclidean(n): monomials of total degree <= p.
/// sphere(1): the trigonometric realization {1, cos k.theta, sin k.theta}
///   evaluated by the angle-addition recurrence; each member is the
///   restriction of a degree-<=p polynomial and the family stays uniformly
///   well conditioned at large p, where a raw monomial subset would push the
///   Gram condition number past the refusal threshold.
/// sphere(2): maximal-rank subset of monomials modulo the quadric relation,
///   chosen by column-pivoted QR on a deterministic point set; rank-verified.
inline SectionBasis build_basis(const AmbientModel& model, int p) {
  if (p < 1) throw config_error("build_basis requires p >= 1");
  SectionBasis basis;
  basis.model = model;
  basis.p = p;
  basis.n_p = section_space_dim(model, p);

  if (model.kind == ModelKind::euclidean) {
    auto exps = monomial_exponents(model.n, p);
    basis.realization = "monomial";
    basis.eval_raw = [exps](const Vector& x, Vector& out) {
      for (std::size_t j = 0; j < exps.size(); ++j) {
        double v = 1.0;
        for (std::size_t d = 0; d < exps[j].size(); ++d)
          for (int e = 0; e < exps[j][d]; ++e) v *= x[static_cast<Index>(d)];
        out[static_cast<Index>(j)] = v;
      }
    };
    return basis;
  }

  if (model.n == 1) {
    basis.realization = "trig";
    const int degree = p;
    basis.eval_raw = [degree](const Vector& x, Vector& out) {
      out[0] = 1.0;
      double c = 1.0, s = 0.0;  // cos(k.theta), sin(k.theta)
      for (int k = 1; k <= degree; ++k) {
        const double cn = c * x[0] - s * x[1];
        const double sn = s * x[0] + c * x[1];
        out[2 * k - 1] = cn;
        out[2 * k] = sn;
        c = cn;
        s = sn;
      }
    };
    return basis;
  }

  // sphere(2): pivoted selection among all monomials of degree <= p
  auto exps = monomial_exponents(3, p);
  const long n_cand = static_cast<long>(exps.size());
  const Matrix pts = detail::probe_points(model, 4 * n_cand);
  const Matrix a = detail::eval_monomials(exps, pts);
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  const auto& perm = qr.colsPermutation().indices();
  const Matrix& r = qr.matrixR();
  const double r0 = std::abs(r(0, 0));
  if (basis.n_p > qr.rank() || std::abs(r(basis.n_p - 1, basis.n_p - 1)) < 1e-10 * r0)
    throw numerical_error("sphere basis selection: evaluation matrix rank deficient");
  std::vector<std::vector<int>> chosen(basis.n_p);
  std::vector<int> order(basis.n_p);
  for (int j = 0; j < basis.n_p; ++j) order[j] = perm[j];
  std::sort(order.begin(), order.end());
  for (int j = 0; j < basis.n_p; ++j) chosen[j] = exps[order[j]];
  basis.realization = "monomial-subset";
  basis.eval_raw = [chosen](const Vector& x, Vector& out) {
    for (std::size_t j = 0; j < chosen.size(); ++j) {
      double v = 1.0;
      for (int d = 0; d < 3; ++d)
        for (int e = 0; e < chosen[j][d]; ++e) v *= x[d];
      out[static_cast<Index>(j)] = v;
    }
  };
  return basis;
}

/// Weighted basis row at x: s_j(x) e^{metric_log_weight} e^{-p phi(x)}, with
/// the orthonormalizing transform applied when present.
inline Vector weighted_row(const SectionBasis& basis, const WeightedDomain& domain,
                           const Vector& x) {
  if (!contains(domain, x)) throw numerical_error("weighted_row: point outside K");
  Vector v = basis.raw(x);
  v *= std::exp(metric_log_weight(basis.model, basis.p, x) - basis.p * domain.phi(x));
  if (basis.transform) return (*basis.transform) * v;
  return v;
}

/// Rows of weighted basis values at each point (rows of `points`).
inline Matrix evaluation_matrix(const SectionBasis& basis, const WeightedDomain& domain,
                                const Matrix& points) {
  Matrix e(points.rows(), basis.n_p);
  for (Index i = 0; i < points.rows(); ++i)
    e.row(i) = weighted_row(basis, domain, points.row(i).transpose()).transpose();
  return e;
}

struct GramProvenance {
  std::string measure_id;
  std::string phi_id;
  int p = 0;
  std::string quadrature;
};

/// L^2(mu, p.phi) Gram matrix of the (current) basis rows.
struct GramMatrix {
  Matrix g;
  GramProvenance provenance;
};

struct GramSpec {
  enum class Kind { exact, monte_carlo } kind = Kind::exact;
  int degree = 0;        // 0: derive 2p (+ density degree) automatically
  long samples = 20000;  // Monte-Carlo only
  std::uint64_t seed = 1;

  static GramSpec exact(int degree = 0) { return {Kind::exact, degree, 0, 0}; }
  static GramSpec monte_carlo(long samples, std::uint64_t seed) {
    return {Kind::monte_carlo, 0, samples, seed};
  }
};

inline double condition_estimate(const Matrix& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

/// Gram matrix of the weighted basis over mu. Exact quadrature entries are
/// reproducible bit for bit for a fixed spec (fixed node order, sequential
/// accumulation); Monte-Carlo uses per-batch seeding so the result does not
/// depend on any execution schedule.
inline GramMatrix gram(const SectionBasis& basis, const WeightedDomain& domain,
                       const BaseMeasure& mu, const GramSpec& spec = {}) {
  Matrix g = Matrix::Zero(basis.n_p, basis.n_p);
  std::string quad_tag;
  if (spec.kind == GramSpec::Kind::exact) {
    if (mu.density_poly_degree < 0)
      throw config_error("exact Gram requested for a non-polynomial density");
    const int degree = spec.degree > 0 ? spec.degree : 2 * basis.p;
    QuadratureRule rule = measure_rule(mu, degree);
    quad_tag = rule.spec;
    for (Index k = 0; k < rule.size(); ++k) {
      const Vector row = weighted_row(basis, domain, rule.nodes.row(k).transpose());
      g.selfadjointView<Eigen::Lower>().rankUpdate(row, rule.weights[k]);
    }
  } else {
    const long batch = 1024;
    const long n_batches = (spec.samples + batch - 1) / batch;
    long done = 0;
    for (long b = 0; b < n_batches; ++b) {
      Rng rng = derive_rng(spec.seed, "gram-batch-" + std::to_string(b));
      const long m = std::min(batch, spec.samples - done);
      for (long k = 0; k < m; ++k) {
        const Vector row = weighted_row(basis, domain, sample_base(mu, rng));
        g.selfadjointView<Eigen::Lower>().rankUpdate(row, 1.0 / spec.samples);
      }
      done += m;
    }
    quad_tag = "mc" + std::to_string(spec.samples) + "@" + std::to_string(spec.seed);
  }
  g = g.selfadjointView<Eigen::Lower>();
  const double cond = condition_estimate(g);
  if (!(cond < 1e12))
    throw numerical_error("Gram condition estimate exceeds 1e12: degenerate (K, mu) or p too large");
  return {std::move(g), {mu.label, domain.phi_label, basis.p, quad_tag}};
}

/// Basis orthonormalized against the given Gram: the inverse Cholesky factor
/// is composed onto any existing transform, so re-computing the Gram of the
/// result yields the identity.
inline SectionBasis orthonormalize(const SectionBasis& basis, const GramMatrix& gm) {
  Eigen::LLT<Matrix> llt(gm.g);
  if (llt.info() != Eigen::Success) throw numerical_error("orthonormalize: Cholesky failed");
  Matrix inv_l = llt.matrixL().solve(Matrix::Identity(basis.n_p, basis.n_p));
  SectionBasis out = basis;
  out.transform = basis.transform ? Matrix(inv_l * (*basis.transform)) : std::move(inv_l);
  out.orth_tag = gm.provenance.measure_id + "|" + gm.provenance.phi_id + "|p" +
                 std::to_string(gm.provenance.p);
  return out;
}

/// Bergman function rho_p(x): squared norm of the orthonormalized weighted
/// row; equals the worst-case pointwise-to-L2 ratio over the section space.
inline double bergman_function(const SectionBasis& basis, const WeightedDomain& domain,
                               const Vector& x) {
  if (!basis.transform)
    throw config_error("bergman_function requires an orthonormalized basis");
  return weighted_row(basis, domain, x).squaredNorm();
}

inline double log_det_spd(const Matrix& g) {
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) throw numerical_error("log_det_spd: matrix not SPD");
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (Index i = 0; i < g.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

/// Difference of unit-ball log-volume functionals computed from two Grams
/// over the same basis realization and degree. The reference volume cancels,
/// so only differences are meaningful.
inline double lp_difference(const SectionBasis& basis, const GramMatrix& g1,
                            const GramMatrix& g2) {
  if (g1.provenance.p != g2.provenance.p || g1.provenance.p != basis.p)
    throw config_error("lp_difference: mismatched degrees");
  const double n = static_cast<double>(basis.n_p);
  return (log_det_spd(g2.g) - log_det_spd(g1.g)) / (4.0 * basis.p * n);
}

}  // namespace betaens
