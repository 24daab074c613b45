#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "betaens/common.hpp"
#include "betaens/detops.hpp"
#include "betaens/geometry.hpp"
#include "betaens/measure.hpp"
#include "betaens/rng.hpp"

namespace betaens {

/// Uniform-weight empirical measure of a point list.
struct EmpiricalMeasure {
  Matrix points;
};

inline EmpiricalMeasure empirical(const Configuration& config) { return {config.points}; }

/// One dictionary member: a mode of unit sup-norm together with the scaling
/// that certifies its C^gamma norm <= 1 and its frequency (Lipschitz bound).
struct DictionaryMode {
  std::function<double(const Vector&)> value;
  double coefficient;
  double frequency;
  std::string name;
};

namespace detail {

inline double associated_legendre(int l, int m, double z) {
  // P_m^m up through P_l^m by the standard upward recurrence
  double pmm = 1.0;
  if (m > 0) {
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    double fact = 1.0;
    for (int i = 0; i < m; ++i) {
      pmm *= -fact * s;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = z * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = ((2.0 * ll - 1.0) * z * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

/// Scaling rule shared by every family: modes of unit sup-norm and Lipschitz
/// bound `freq` get coefficient 1 / (2 (1 + max(1, freq)^gamma)). The factor
/// 2 covers the Hoelder quotient of a Lipschitz mode; clamping the frequency
/// at 1 keeps the coefficient non-increasing in gamma, so dictionaries for
/// increasing gamma are nested and the estimator is monotone.
inline double mode_coefficient(double gamma, double freq) {
  return 1.0 / (2.0 * (1.0 + std::pow(std::max(1.0, freq), gamma)));
}

}  // namespace detail

/// Finite dictionary spanning the C^gamma test ball: scaled Fourier modes on
/// the circle and the interval, scaled real spherical harmonics on S^2. The
/// declared norms (sup <= 1, Hoelder-gamma quotient <= 1 under geodesic
/// distance) are verified on a grid at construction.
class TestDictionary {
 public:
  double gamma;
  std::vector<DictionaryMode> modes;
  std::string spec;

  static TestDictionary build(const WeightedDomain& domain, double gamma, int n_modes = 32) {
    if (!(gamma > 0.0 && gamma <= 2.0)) throw config_error("dictionary gamma must lie in (0,2]");
    TestDictionary dict;
    dict.gamma = gamma;
    const AmbientModel& m = domain.model;
    if (m.kind == ModelKind::sphere && m.n == 1) {
      const int kmax = std::max(1, n_modes / 2);
      for (int k = 1; k <= kmax; ++k) {
        const double coef = detail::mode_coefficient(gamma, k);
        const double kk = k;
        dict.modes.push_back({[kk](const Vector& x) { return std::cos(kk * circle_angle(x)); },
                              coef, kk, "cos" + std::to_string(k)});
        dict.modes.push_back({[kk](const Vector& x) { return std::sin(kk * circle_angle(x)); },
                              coef, kk, "sin" + std::to_string(k)});
      }
      dict.spec = "circle-fourier-" + std::to_string(2 * kmax);
    } else if (m.kind == ModelKind::euclidean && m.n == 1) {
      const Box& b = domain.box();
      const double lo = b.lo[0], w = b.hi[0] - b.lo[0];
      for (int k = 1; k <= n_modes; ++k) {
        const double freq = k * kPi / w;
        const double coef = detail::mode_coefficient(gamma, freq);
        dict.modes.push_back(
            {[k, lo, w](const Vector& x) { return std::cos(k * kPi * (x[0] - lo) / w); }, coef,
             freq, "cos" + std::to_string(k)});
      }
      dict.spec = "interval-fourier-" + std::to_string(n_modes);
    } else if (m.kind == ModelKind::sphere && m.n == 2) {
      const int lmax = 8;
      const Matrix grid = domain_grid(domain, 4096);
      for (int l = 1; l <= lmax; ++l)
        for (int mm = 0; mm <= l; ++mm)
          for (int part = 0; part < (mm == 0 ? 1 : 2); ++part) {
            const bool use_sin = part == 1;
            auto raw = [l, mm, use_sin](const Vector& x) {
              const double z = x[2];
              const double az = std::atan2(x[1], x[0]);
              const double p = detail::associated_legendre(l, mm, z);
              return p * (use_sin ? std::sin(mm * az) : std::cos(mm * az));
            };
            double sup = 0.0;
            for (Index g = 0; g < grid.rows(); ++g)
              sup = std::max(sup, std::abs(raw(grid.row(g).transpose())));
            const double inv_sup = 1.0 / sup;
            const double coef = detail::mode_coefficient(gamma, l);
            dict.modes.push_back(
                {[raw, inv_sup](const Vector& x) { return inv_sup * raw(x); }, coef,
                 static_cast<double>(l),
                 "Y" + std::to_string(l) + (use_sin ? "s" : "c") + std::to_string(mm)});
          }
      dict.spec = "sphere2-harmonics-l" + std::to_string(lmax);
    } else {
      throw config_error("no test dictionary for this ambient model");
    }
    dict.verify(domain);
    return dict;
  }

  /// Grid certification of the declared norms of every scaled member.
  void verify(const WeightedDomain& domain) const {
    const long resolution = domain.model.kind == ModelKind::sphere && domain.model.n == 2
                                ? 512
                                : 1024;
    const Matrix grid = domain_grid(domain, resolution);
    const bool spherical = domain.model.kind == ModelKind::sphere;
    std::vector<Vector> pts(static_cast<std::size_t>(grid.rows()));
    for (Index i = 0; i < grid.rows(); ++i) pts[static_cast<std::size_t>(i)] = grid.row(i);
    for (const DictionaryMode& mode : modes) {
      std::vector<double> vals(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i)
        vals[i] = mode.coefficient * mode.value(pts[i]);
      double sup = 0.0;
      for (double v : vals) sup = std::max(sup, std::abs(v));
      if (sup > 1.0 + 1e-12)
        throw numerical_error("dictionary member " + mode.name + " violates the sup bound");
      double quot = 0.0;
      const std::size_t stride = pts.size() > 256 ? pts.size() / 256 : 1;
      for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); j += stride) {
          double d = spherical
                         ? std::acos(std::clamp(pts[i].dot(pts[j]), -1.0, 1.0))
                         : (pts[i] - pts[j]).norm();
          if (d < 1e-12) continue;
          quot = std::max(quot, std::abs(vals[i] - vals[j]) / std::pow(d, gamma));
        }
      if (quot > 1.0 + 1e-9)
        throw numerical_error("dictionary member " + mode.name + " violates the Hoelder bound");
    }
  }
};

/// Finitely supported signed pairing data: points with weights.
struct MeasureAtoms {
  Matrix points;
  Vector weights;
};

inline MeasureAtoms atoms(const EmpiricalMeasure& m) {
  const double w = 1.0 / static_cast<double>(m.points.rows());
  return {m.points, Vector::Constant(m.points.rows(), w)};
}

/// Reference for the limiting measure: closed-form Haar on a full sphere with
/// zero weight, otherwise the empirical measure of a high-degree near-Fekete
/// configuration (with a 1-d binned density view when available).
struct EquilibriumRef {
  enum class Kind { haar, fekete } kind = Kind::haar;
  Matrix points;  // fekete only
  int p_ref = 0;
  Vector bin_edges;  // 1-d view: angle (circle) or coordinate (interval)
  Vector bin_mass;
};

/// Dictionary pairing of two finitely supported measures: the exact supremum
/// over the dictionary span, a lower bound for the full C^gamma distance.
inline double dist_gamma(const TestDictionary& dict, const MeasureAtoms& m1,
                         const MeasureAtoms& m2) {
  double best = 0.0;
  for (const DictionaryMode& mode : dict.modes) {
    double acc = 0.0;
    for (Index i = 0; i < m1.points.rows(); ++i)
      acc += m1.weights[i] * mode.value(m1.points.row(i).transpose());
    for (Index i = 0; i < m2.points.rows(); ++i)
      acc -= m2.weights[i] * mode.value(m2.points.row(i).transpose());
    best = std::max(best, mode.coefficient * std::abs(acc));
  }
  return best;
}

inline double dist_gamma(const TestDictionary& dict, const EmpiricalMeasure& m1,
                         const EmpiricalMeasure& m2) {
  return dist_gamma(dict, atoms(m1), atoms(m2));
}

inline double dist_gamma(const TestDictionary& dict, const EmpiricalMeasure& m,
                         const EquilibriumRef& ref) {
  if (ref.kind == EquilibriumRef::Kind::haar) {
    // every dictionary mode integrates to zero against Haar
    MeasureAtoms zero{Matrix(0, m.points.cols()), Vector(0)};
    return dist_gamma(dict, atoms(m), zero);
  }
  const double w = 1.0 / static_cast<double>(ref.points.rows());
  return dist_gamma(dict, atoms(m), {ref.points, Vector::Constant(ref.points.rows(), w)});
}

namespace detail {

/// Exact W1 between finitely supported measures on the line: integral of the
/// CDF difference between consecutive breakpoints.
inline double w1_line(std::vector<std::pair<double, double>> a,
                      std::vector<std::pair<double, double>> b) {
  for (auto& [x, w] : b) w = -w;
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  double total = 0.0, cdf = 0.0;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    cdf += a[i].second;
    total += std::abs(cdf) * (a[i + 1].first - a[i].first);
  }
  return total;
}

struct CircularSegment {
  double len;
  double g0, g1;  // signed CDF difference at the segment ends (linear within)
};

/// Exact circular W1 of a signed difference described by atoms and a signed
/// uniform component: min over the cut constant c of the integral of
/// |G - c|, with the length-median c found by bisection.
inline double w1_circle_signed(std::vector<std::pair<double, double>> atoms_signed,
                               double uniform_signed) {
  const double two_pi = 2.0 * kPi;
  for (auto& [t, w] : atoms_signed) {
    t = std::fmod(t, two_pi);
    if (t < 0) t += two_pi;
  }
  std::sort(atoms_signed.begin(), atoms_signed.end());
  const double slope = uniform_signed / two_pi;
  std::vector<CircularSegment> segs;
  double g = 0.0, t_prev = 0.0;
  for (std::size_t i = 0; i <= atoms_signed.size(); ++i) {
    const double t_next = i < atoms_signed.size() ? atoms_signed[i].first : two_pi;
    const double len = t_next - t_prev;
    if (len > 0) segs.push_back({len, g, g + slope * len});
    g += slope * len;
    if (i < atoms_signed.size()) g += atoms_signed[i].second;
    t_prev = t_next;
  }
  double lo = kPosInf, hi = kNegInf;
  for (const auto& s : segs) {
    lo = std::min(lo, std::min(s.g0, s.g1));
    hi = std::max(hi, std::max(s.g0, s.g1));
  }
  const auto length_below = [&](double c) {
    double acc = 0.0;
    for (const auto& s : segs) {
      const double a = s.g0, b = s.g1;
      if (a <= c && b <= c) acc += s.len;
      else if (a < c || b < c) acc += s.len * (c - std::min(a, b)) / std::abs(b - a);
    }
    return acc;
  };
  const double half = kPi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (length_below(mid) < half ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);
  double total = 0.0;
  for (const auto& s : segs) {
    const double a = s.g0 - c, b = s.g1 - c;
    if (a * b >= 0.0) total += s.len * 0.5 * (std::abs(a) + std::abs(b));
    else total += s.len * 0.5 * (a * a + b * b) / (std::abs(a) + std::abs(b));
  }
  return total;
}

inline std::vector<std::pair<double, double>> angle_atoms(const Matrix& points, double sign) {
  std::vector<std::pair<double, double>> out;
  const double w = sign / static_cast<double>(points.rows());
  out.reserve(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i)
    out.emplace_back(circle_angle(points.row(i).transpose()), w);
  return out;
}

}  // namespace detail

/// Exact Kantorovich W1 on 1-dimensional supports: sorted-CDF coupling on
/// intervals, the optimal-cut reduction on the circle. Other geometries are
/// rejected (use wasserstein1_entropic for S^2).
inline double wasserstein1(const WeightedDomain& domain, const EmpiricalMeasure& m1,
                           const EmpiricalMeasure& m2) {
  const AmbientModel& m = domain.model;
  if (m.kind == ModelKind::euclidean && m.n == 1) {
    std::vector<std::pair<double, double>> a, b;
    const double wa = 1.0 / static_cast<double>(m1.points.rows());
    const double wb = 1.0 / static_cast<double>(m2.points.rows());
    for (Index i = 0; i < m1.points.rows(); ++i) a.emplace_back(m1.points(i, 0), wa);
    for (Index i = 0; i < m2.points.rows(); ++i) b.emplace_back(m2.points(i, 0), wb);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return detail::w1_line(std::move(a), std::move(b));
  }
  if (m.kind == ModelKind::sphere && m.n == 1) {
    auto atoms = detail::angle_atoms(m1.points, 1.0);
    auto neg = detail::angle_atoms(m2.points, -1.0);
    atoms.insert(atoms.end(), neg.begin(), neg.end());
    return detail::w1_circle_signed(std::move(atoms), 0.0);
  }
  throw config_error("wasserstein1: exact transport needs an interval or circle geometry");
}

inline double wasserstein1(const WeightedDomain& domain, const EmpiricalMeasure& m1,
                           const EquilibriumRef& ref) {
  if (ref.kind == EquilibriumRef::Kind::fekete)
    return wasserstein1(domain, m1, EmpiricalMeasure{ref.points});
  const AmbientModel& m = domain.model;
  if (m.kind == ModelKind::sphere && m.n == 1)
    return detail::w1_circle_signed(detail::angle_atoms(m1.points, 1.0), -1.0);
  throw config_error("wasserstein1: closed-form reference only on the circle");
}

/// Entropic-regularized transport on S^2 with geodesic cost; approximate by
/// construction, the regularization is part of the result's provenance.
struct EntropicW1 {
  double value;
  double epsilon;
};

inline EntropicW1 wasserstein1_entropic(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2,
                                        double epsilon = 0.05, int max_iter = 2000) {
  const Index na = m1.points.rows(), nb = m2.points.rows();
  Matrix cost(na, nb);
  for (Index i = 0; i < na; ++i)
    for (Index j = 0; j < nb; ++j)
      cost(i, j) = std::acos(std::clamp(m1.points.row(i).dot(m2.points.row(j)), -1.0, 1.0));
  const Matrix k = (-cost / epsilon).array().exp();
  Vector u = Vector::Constant(na, 1.0 / na), v = Vector::Constant(nb, 1.0 / nb);
  const Vector a = Vector::Constant(na, 1.0 / na), b = Vector::Constant(nb, 1.0 / nb);
  for (int it = 0; it < max_iter; ++it) {
    u = a.cwiseQuotient((k * v).cwiseMax(1e-300));
    v = b.cwiseQuotient((k.transpose() * u).cwiseMax(1e-300));
    if (it % 50 == 49) {
      const Vector marg = u.cwiseProduct(k * v);
      if ((marg - a).cwiseAbs().maxCoeff() < 1e-12) break;
    }
  }
  const Matrix plan = u.asDiagonal() * k * v.asDiagonal();
  return {(plan.array() * cost.array()).sum(), epsilon};
}

/// Reference measure for (K, phi): Haar in the symmetric closed-form case,
/// otherwise the empirical measure of a near-Fekete configuration at a
/// reference degree, with ~sqrt(N_p) bins for the 1-d density view.
inline EquilibriumRef equilibrium_ref(const WeightedDomain& domain, const BaseMeasure& mu,
                                      int p_ref, long pool_grid, Rng& rng) {
  EquilibriumRef ref;
  if (domain.is_full_sphere() && domain.phi_label == "zero") {
    ref.kind = EquilibriumRef::Kind::haar;
    return ref;
  }
  const SectionBasis basis = build_basis(domain.model, p_ref);
  const Matrix pool = build_fekete_pool(domain, mu, pool_grid, basis.n_p, rng);
  const FeketeResult fk = fekete_search(basis, domain, pool);
  ref.kind = EquilibriumRef::Kind::fekete;
  ref.points = fk.config.points;
  ref.p_ref = p_ref;
  // 1-d binned view
  double lo = 0.0, hi = 0.0;
  std::vector<double> coords;
  if (domain.model.kind == ModelKind::euclidean && domain.model.n == 1) {
    lo = domain.box().lo[0];
    hi = domain.box().hi[0];
    for (Index i = 0; i < ref.points.rows(); ++i) coords.push_back(ref.points(i, 0));
  } else if (domain.model.kind == ModelKind::sphere && domain.model.n == 1) {
    lo = 0.0;
    hi = 2.0 * kPi;
    for (Index i = 0; i < ref.points.rows(); ++i) {
      double th = circle_angle(ref.points.row(i).transpose());
      if (th < 0) th += 2.0 * kPi;
      coords.push_back(th);
    }
  } else {
    return ref;  // no 1-d view on S^2 or higher-dimensional boxes
  }
  const int bins = std::max(4, static_cast<int>(std::lround(std::sqrt(coords.size()))));
  ref.bin_edges = Vector::LinSpaced(bins + 1, lo, hi);
  ref.bin_mass = Vector::Zero(bins);
  for (double c : coords) {
    int b = std::min(bins - 1, static_cast<int>((c - lo) / (hi - lo) * bins));
    ref.bin_mass[std::max(0, b)] += 1.0 / static_cast<double>(coords.size());
  }
  return ref;
}

struct LdpRow {
  int p;
  double median, q25, q75, threshold, exceedance;
};

struct LdpFit {
  double distance_exponent = 0.0;
  double exponent_stderr = 0.0;
  std::optional<double> tail_decay_exponent;  // slope convention: e^{-p^2} gives -2
  std::vector<LdpRow> tail_curve;
};

namespace detail {

inline double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const double h = prob * (static_cast<double>(v.size()) - 1.0);
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (h - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

struct LineFit {
  double slope, stderr_;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - my - slope * (x[i] - mx);
    rss += r * r;
  }
  const double se = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
  return {slope, se};
}

}  // namespace detail

/// Fits the decay of per-degree distance samples: the log-log slope of the
/// median against p, and a self-calibrated exceedance curve for the
/// threshold c q^gamma with q = p^{-delta/4} and c anchored so the largest
/// degree's threshold equals its median.
inline LdpFit ldp_fit(std::vector<std::pair<int, std::vector<double>>> records, double gamma,
                      double delta) {
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  if (records.size() < 4) throw missing_input_error("ldp_fit: needs at least 4 degrees");
  for (const auto& [p, d] : records)
    if (d.empty()) throw missing_input_error("ldp_fit: empty sample list for a degree");
  LdpFit fit;
  std::vector<double> log_p, log_med;
  for (const auto& [p, d] : records) {
    log_p.push_back(std::log(static_cast<double>(p)));
    log_med.push_back(std::log(detail::quantile(d, 0.5)));
  }
  const auto line = detail::fit_line(log_p, log_med);
  fit.distance_exponent = line.slope;
  fit.exponent_stderr = line.stderr_;

  const auto q_of = [&](int p) { return std::pow(static_cast<double>(p), -delta / 4.0); };
  const int p_max = records.back().first;
  const double c = detail::quantile(records.back().second, 0.5) / std::pow(q_of(p_max), gamma);
  std::vector<double> tail_x, tail_y;
  for (const auto& [p, d] : records) {
    LdpRow row;
    row.p = p;
    row.median = detail::quantile(d, 0.5);
    row.q25 = detail::quantile(d, 0.25);
    row.q75 = detail::quantile(d, 0.75);
    row.threshold = c * std::pow(q_of(p), gamma);
    long over = 0;
    for (double v : d)
      if (v > row.threshold) ++over;
    row.exceedance = static_cast<double>(over) / static_cast<double>(d.size());
    if (row.exceedance > 0.0 && row.exceedance < 1.0) {
      tail_x.push_back(std::log(static_cast<double>(p)));
      tail_y.push_back(std::log(-std::log(row.exceedance)));
    }
    fit.tail_curve.push_back(row);
  }
  if (tail_x.size() >= 2) fit.tail_decay_exponent = -detail::fit_line(tail_x, tail_y).slope;
  return fit;
}

}  // namespace betaens
