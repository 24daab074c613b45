#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "betaens/basis.hpp"
#include "betaens/common.hpp"
#include "betaens/geometry.hpp"
#include "betaens/measure.hpp"
#include "betaens/rng.hpp"

namespace betaens {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// An ordered N_p-point configuration in K (rows are points).
struct Configuration {
  Matrix points;
  int p = 1;

  Index size() const { return points.rows(); }
};

struct LogDet {
  double logabsdet;
  int sign;  // 0 when exactly singular
};

inline LogDet logdet_of_matrix(const Matrix& m) {
  Eigen::PartialPivLU<Matrix> lu(m);
  const auto& u = lu.matrixLU();
  double logabs = 0.0;
  int sign = lu.permutationP().determinant() > 0 ? 1 : -1;
  for (Index i = 0; i < m.rows(); ++i) {
    const double d = u(i, i);
    if (d == 0.0) return {kNegInf, 0};
    logabs += std::log(std::abs(d));
    if (d < 0.0) sign = -sign;
  }
  return {logabs, sign};
}

/// log |det| of the weighted evaluation matrix of the configuration, via
/// pivoted LU; -inf when exactly singular. Changing the raw basis shifts the
/// value by a configuration-independent constant.
inline LogDet logdet(const SectionBasis& basis, const WeightedDomain& domain,
                     const Configuration& config) {
  if (config.size() != basis.n_p)
    throw config_error("logdet: configuration size does not match N_p");
  return logdet_of_matrix(evaluation_matrix(basis, domain, config.points));
}

/// Weighted evaluation matrix of a configuration together with a maintained
/// inverse, so single-row replacements cost O(N_p^2). The log-determinant is
/// re-anchored by a full factorization after at most `kRefreshPeriod` rank-1
/// updates, keeping cumulative drift below 1e-6 in double precision.
class DetState {
 public:
  static constexpr int kRefreshPeriod = 64;

  DetState(const SectionBasis& basis, const WeightedDomain& domain, Configuration config)
      : basis_(&basis), domain_(&domain), config_(std::move(config)) {
    if (config_.size() != basis.n_p)
      throw config_error("DetState: configuration size does not match N_p");
    matrix_ = evaluation_matrix(basis, domain, config_.points);
    refresh();
  }

  double logabsdet() const { return logabs_; }
  int sign() const { return sign_; }
  bool singular() const { return sign_ == 0; }
  const Configuration& config() const { return config_; }
  const Matrix& matrix() const { return matrix_; }
  int updates_since_refresh() const { return updates_since_refresh_; }

  /// Column i of the maintained inverse; only valid while nonsingular.
  Vector inverse_column(Index i) const { return minv_.col(i); }

  /// delta log|det| if row i were replaced by `row` (no state change).
  double propose_row(Index i, const Vector& row) const {
    if (singular()) {
      Matrix m = matrix_;
      m.row(i) = row.transpose();
      const LogDet fresh = logdet_of_matrix(m);
      return fresh.sign == 0 ? kNegInf : kPosInf;
    }
    const double r = row.dot(minv_.col(i));
    return r == 0.0 ? kNegInf : std::log(std::abs(r));
  }

  double propose_point(Index i, const Vector& x) const {
    return propose_row(i, weighted_row(*basis_, *domain_, x));
  }

  /// Replace row i (point and cached row), returning the delta log|det|.
  double update_row(Index i, const Vector& x, const Vector& row) {
    const double delta = propose_row(i, row);
    config_.points.row(i) = x.transpose();
    matrix_.row(i) = row.transpose();
    if (!std::isfinite(delta) || ++updates_since_refresh_ >= kRefreshPeriod) {
      refresh();
    } else {
      const double r = row.dot(minv_.col(i));
      const Vector c = minv_.col(i);
      Eigen::RowVectorXd d = row.transpose() * minv_;
      d(i) -= 1.0;
      minv_.noalias() -= c * (d / r);
      logabs_ += std::log(std::abs(r));
      if (r < 0.0) sign_ = -sign_;
    }
    return delta;
  }

  double update_point(Index i, const Vector& x) {
    return update_row(i, x, weighted_row(*basis_, *domain_, x));
  }

  /// Full refactorization; re-anchors logabsdet, sign and the inverse.
  void refresh() {
    const LogDet fresh = logdet_of_matrix(matrix_);
    logabs_ = fresh.logabsdet;
    sign_ = fresh.sign;
    if (sign_ != 0) minv_ = matrix_.partialPivLu().inverse();
    updates_since_refresh_ = 0;
  }

 private:
  const SectionBasis* basis_;
  const WeightedDomain* domain_;
  Configuration config_;
  Matrix matrix_;
  Matrix minv_;
  double logabs_ = kNegInf;
  int sign_ = 0;
  int updates_since_refresh_ = 0;
};

struct FeketeBudget {
  long max_moves = -1;     // < 0: default 400 * N_p
  int refine_rounds = 60;  // pattern-search step halvings; 0 disables
  double tol = 1e-10;
};

struct FeketeResult {
  Configuration config;
  double logabsdet = kNegInf;
  long moves = 0;
  long pool_size = 0;
};

/// Tensor grid over K plus 4 N_p draws from mu: the default candidate pool.
inline Matrix build_fekete_pool(const WeightedDomain& domain, const BaseMeasure& mu,
                                long grid_resolution, int n_p, Rng& rng) {
  const Matrix grid = domain_grid(domain, grid_resolution);
  const long extra = 4L * n_p;
  Matrix pool(grid.rows() + extra, grid.cols());
  pool.topRows(grid.rows()) = grid;
  for (long k = 0; k < extra; ++k)
    pool.row(grid.rows() + k) = sample_base(mu, rng).transpose();
  return pool;
}

namespace detail {

/// Greedy volume-maximizing row selection (pivoted Gram-Schmidt on the pool
/// evaluation matrix). Ties break toward the lowest candidate index.
inline std::vector<Index> greedy_volume_rows(const Matrix& eval, int n_p) {
  Matrix res = eval;
  Vector norms = res.rowwise().squaredNorm();
  std::vector<bool> used(static_cast<std::size_t>(eval.rows()), false);
  std::vector<Index> chosen;
  chosen.reserve(n_p);
  for (int k = 0; k < n_p; ++k) {
    Index best = -1;
    double best_norm = 0.0;
    for (Index i = 0; i < eval.rows(); ++i)
      if (!used[static_cast<std::size_t>(i)] && norms[i] > best_norm) {
        best_norm = norms[i];
        best = i;
      }
    if (best < 0) throw numerical_error("fekete_search: candidate pool is rank deficient");
    used[static_cast<std::size_t>(best)] = true;
    chosen.push_back(best);
    const Vector q = res.row(best).transpose() / std::sqrt(best_norm);
    const Vector coef = res * q;
    res.noalias() -= coef * q.transpose();
    norms.noalias() -= coef.cwiseProduct(coef);
    norms = norms.cwiseMax(0.0);
  }
  return chosen;
}

/// Deterministic local moves about a point: coordinate steps clamped to the
/// box, or tangent rotations on the sphere. `h` is a fraction of the domain
/// scale.
inline std::vector<Vector> local_moves(const WeightedDomain& domain, const Vector& x, double h) {
  std::vector<Vector> moves;
  if (domain.model.kind == ModelKind::euclidean) {
    const Box& b = domain.box();
    for (Index d = 0; d < x.size(); ++d) {
      const double step = h * (b.hi[d] - b.lo[d]);
      for (const double s : {step, -step}) {
        Vector y = x;
        y[d] = std::min(b.hi[d], std::max(b.lo[d], y[d] + s));
        moves.push_back(std::move(y));
      }
    }
    return moves;
  }
  const double angle = h * kPi;
  if (domain.model.n == 1) {
    const double th = circle_angle(x);
    moves.push_back(circle_point(th + angle));
    moves.push_back(circle_point(th - angle));
    return moves;
  }
  // two orthonormal tangent directions at x on S^2
  const Eigen::Vector3d xv(x[0], x[1], x[2]);
  Eigen::Vector3d t1 = xv.cross(std::abs(x[0]) < 0.9 ? Eigen::Vector3d::UnitX()
                                                     : Eigen::Vector3d::UnitY());
  t1.normalize();
  const Eigen::Vector3d t2 = xv.cross(t1);
  for (const Eigen::Vector3d* t : {&t1, &t2})
    for (const double s : {angle, -angle}) {
      Eigen::Vector3d y = std::cos(s) * xv + std::sin(s) * (*t);
      y.normalize();
      moves.push_back(Vector(y));
    }
  return moves;
}

}  // namespace detail

/// Near-Fekete configuration: greedy volume-maximizing initialization over
/// the pool, then best-improvement single-point exchanges against the pool,
/// then a deterministic shrinking pattern search. The result's log|det| never
/// falls below the initialization's.
inline FeketeResult fekete_search(const SectionBasis& basis, const WeightedDomain& domain,
                                  const Matrix& pool, const FeketeBudget& budget = {}) {
  const int n_p = basis.n_p;
  if (pool.rows() < 4L * n_p) throw config_error("fekete_search: pool smaller than 4 N_p");
  if (budget.max_moves == 0) throw config_error("fekete_search: zero budget");
  const long max_moves = budget.max_moves < 0 ? 400L * n_p : budget.max_moves;

  const Matrix pool_eval = evaluation_matrix(basis, domain, pool);
  const std::vector<Index> seed_rows = detail::greedy_volume_rows(pool_eval, n_p);
  Configuration config;
  config.p = basis.p;
  config.points.resize(n_p, pool.cols());
  for (int k = 0; k < n_p; ++k) config.points.row(k) = pool.row(seed_rows[k]);

  DetState state(basis, domain, config);
  long moves = 0;

  // pool exchange: apply the single best move until no move clears tol
  while (moves < max_moves) {
    Index best_slot = -1, best_cand = -1;
    double best_score = std::exp(budget.tol);
    for (Index i = 0; i < n_p; ++i) {
      if (state.singular()) break;
      const Vector scores = (pool_eval * state.inverse_column(i)).cwiseAbs();
      for (Index c = 0; c < scores.size(); ++c)
        if (scores[c] > best_score) {
          best_score = scores[c];
          best_slot = i;
          best_cand = c;
        }
    }
    if (best_slot < 0) break;
    state.update_row(best_slot, pool.row(best_cand).transpose(),
                     pool_eval.row(best_cand).transpose());
    ++moves;
  }

  // shrinking pattern search along coordinate / tangent directions
  double h = 0.5 / static_cast<double>(n_p);
  for (int round = 0; round < budget.refine_rounds && moves < max_moves; ++round) {
    bool improved = false;
    for (Index i = 0; i < n_p && moves < max_moves; ++i) {
      const Vector x = state.config().points.row(i).transpose();
      Vector best_move;
      double best_delta = budget.tol;
      for (const Vector& y : detail::local_moves(domain, x, h)) {
        if (!contains(domain, y)) continue;
        const double delta = state.propose_point(i, y);
        if (delta > best_delta) {
          best_delta = delta;
          best_move = y;
        }
      }
      if (best_move.size() > 0) {
        state.update_point(i, best_move);
        ++moves;
        improved = true;
      }
    }
    if (!improved) h *= 0.5;
    if (h < 1e-12) break;
  }

  state.refresh();
  FeketeResult result;
  result.config = state.config();
  result.logabsdet = state.logabsdet();
  result.moves = moves;
  result.pool_size = pool.rows();
  return result;
}

/// Normalized log-determinant gap of `config` against the best known
/// configuration. A computable surrogate for the distance to Fekete: the
/// sup-norm is replaced by the reference's value, so the result lower-bounds
/// the true gap; if the reference is worse the roles are swapped, keeping the
/// value nonnegative. Singular configurations give +inf.
inline double sigma_hat(const SectionBasis& basis, const WeightedDomain& domain,
                        const Configuration& config, const Configuration& fekete_ref) {
  const LogDet ref = logdet(basis, domain, fekete_ref);
  const LogDet own = logdet(basis, domain, config);
  if (own.sign == 0) return kPosInf;
  if (ref.sign == 0) return kPosInf;
  const double gap = std::abs(ref.logabsdet - own.logabsdet);
  return gap / (static_cast<double>(basis.p) * static_cast<double>(basis.n_p));
}

/// Best constant B_p with sup_K |s| <= B_p ||s||_L2 restricted to the grid:
/// sqrt of the maximal Bergman value.
inline double bm_constant(const SectionBasis& basis, const WeightedDomain& domain,
                          const Matrix& grid) {
  if (grid.rows() == 0) throw config_error("bm_constant: empty grid");
  double best = 0.0;
  for (Index i = 0; i < grid.rows(); ++i)
    best = std::max(best, bergman_function(basis, domain, grid.row(i).transpose()));
  return std::sqrt(best);
}

struct BmFit {
  double a;         // smallest A with log B_p <= log A + A p^{1-delta} on the data
  double residual;  // rms slack of the fitted bound
};

inline BmFit bm_fit(const std::vector<std::pair<int, double>>& b_sequence, double delta) {
  if (b_sequence.empty()) throw config_error("bm_fit: empty sequence");
  if (!(delta > 0.0 && delta < 1.0)) throw config_error("bm_fit: delta must lie in (0,1)");
  double a_star = 0.0;
  for (const auto& [p, b] : b_sequence) {
    if (!(b > 0.0)) throw config_error("bm_fit: nonpositive constant in sequence");
    const double t = std::pow(static_cast<double>(p), 1.0 - delta);
    const double target = std::log(b);
    // log A + A t is increasing in A; bisect for the root
    double lo = 1e-300, hi = 1.0;
    while (std::log(hi) + hi * t < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (std::log(mid) + mid * t < target ? lo : hi) = mid;
    }
    a_star = std::max(a_star, hi);
  }
  double rss = 0.0;
  for (const auto& [p, b] : b_sequence) {
    const double t = std::pow(static_cast<double>(p), 1.0 - delta);
    const double slack = std::log(a_star) + a_star * t - std::log(b);
    rss += slack * slack;
  }
  return {a_star, std::sqrt(rss / static_cast<double>(b_sequence.size()))};
}

/// Worst-case ratio of the L2(mu) norm to the L2(mu^x) norm over sections:
/// sqrt of the top generalized eigenvalue of G_mu v = lambda G_x v with
/// G_x = E^T E / N_p.
inline double tau2(const SectionBasis& basis, const WeightedDomain& domain,
                   const GramMatrix& gram_mu, const Configuration& config) {
  if (config.size() != basis.n_p) throw config_error("tau2: configuration size mismatch");
  const Matrix e = evaluation_matrix(basis, domain, config.points);
  Matrix gx = (e.transpose() * e) / static_cast<double>(basis.n_p);
  Eigen::LLT<Matrix> llt(gx);
  if (llt.info() != Eigen::Success)
    throw numerical_error("tau2: singular configuration Gram");
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(gram_mu.g, gx, Eigen::EigenvaluesOnly);
  return std::sqrt(solver.eigenvalues().maxCoeff());
}

}  // namespace betaens
