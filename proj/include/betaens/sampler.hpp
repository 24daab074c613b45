#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "betaens/basis.hpp"
#include "betaens/common.hpp"
#include "betaens/detops.hpp"
#include "betaens/measure.hpp"
#include "betaens/rng.hpp"

namespace betaens {

/// Data of the beta-ensemble nu_p^beta: joint log-density of a configuration
/// (up to the unknown normalizing constant) equals beta times the weighted
/// log-determinant, with both the ambient metric factor and e^{-p phi}
/// carried by the weighted rows.
struct EnsembleSpec {
  double beta = 2.0;
  int p = 1;
  std::shared_ptr<const WeightedDomain> domain;
  BaseMeasure measure;
  SectionBasis basis;
  double sigma_loc = 0.0;  // 0: default diam(K) / (4p)

  double local_step() const {
    return sigma_loc > 0.0 ? sigma_loc : diameter(*domain) / (4.0 * p);
  }
};

inline double log_density(const EnsembleSpec& spec, const Configuration& config) {
  const LogDet d = logdet(spec.basis, *spec.domain, config);
  return d.sign == 0 ? kNegInf : spec.beta * d.logabsdet;
}

/// Log Metropolis ratio for a single-site move. Independence proposals draw
/// from mu, so the reference-measure densities cancel and the correction is
/// zero; symmetric local proposals need the log ratio of the mu density at
/// the proposed and current sites.
inline double mh_log_ratio(double beta, double delta_log, double log_density_correction) {
  return beta * delta_log + log_density_correction;
}

/// Symmetric local move: Gaussian step in the box, or an ambient Gaussian
/// step renormalized to the sphere (isotropy makes the kernel symmetric with
/// respect to the surface measure).
inline Vector local_proposal(const WeightedDomain& domain, const Vector& x, double step,
                             Rng& rng) {
  Vector y = x;
  for (Index d = 0; d < y.size(); ++d) y[d] += step * rng.normal();
  if (domain.model.kind == ModelKind::sphere) y.normalize();
  return y;
}

struct ChainState {
  DetState det;
  long accepted = 0;
  long proposed = 0;
  Rng rng;

  ChainState(const EnsembleSpec& spec, Configuration init, Rng r)
      : det(spec.basis, *spec.domain, std::move(init)), rng(r) {}

  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / proposed;
  }
};

/// One single-site Metropolis update: pick a site uniformly, propose from mu
/// with probability 1/2 or from the local kernel otherwise, accept with
/// min(1, exp(beta delta_log + correction)). The mixture kernel is in
/// detailed balance with nu_p^beta.
inline void mcmc_step(const EnsembleSpec& spec, ChainState& state) {
  const Index i = state.rng.uniform_int(spec.basis.n_p);
  const bool independence = state.rng.uniform() < 0.5;
  Vector x_new;
  double correction = 0.0;
  if (independence) {
    x_new = sample_base(spec.measure, state.rng);
  } else {
    const Vector x_old = state.det.config().points.row(i).transpose();
    x_new = local_proposal(*spec.domain, x_old, spec.local_step(), state.rng);
    ++state.proposed;
    if (!contains(*spec.domain, x_new)) return;  // zero target outside K
    correction = std::log(spec.measure.density(x_new)) - std::log(spec.measure.density(x_old));
  }
  if (independence) ++state.proposed;
  const Vector row = weighted_row(spec.basis, *spec.domain, x_new);
  const double delta = state.det.propose_row(i, row);
  const double log_r = mh_log_ratio(spec.beta, delta, correction);
  if (log_r >= 0.0 || state.rng.uniform() < std::exp(log_r)) {
    state.det.update_row(i, x_new, row);
    ++state.accepted;
  }
}

struct ChainRun {
  std::vector<Configuration> samples;
  std::vector<double> logdet_trace;
  long burn_in = 0;
  long thin = 0;
  long proposed = 0;
  long accepted = 0;

  double acceptance_rate() const {
    return proposed == 0 ? 0.0 : static_cast<double>(accepted) / proposed;
  }
};

/// Runs a chain from `init`: `burn_in` steps, then `keep` snapshots every
/// `thin` steps. Negative burn_in / thin select the defaults 50 N_p^2 and
/// N_p. Diagnostics are recorded even when keep = 0.
inline ChainRun run_chain(const EnsembleSpec& spec, const Configuration& init, long burn_in,
                          long keep, long thin, Rng rng) {
  const long n = spec.basis.n_p;
  if (burn_in < 0) burn_in = 50 * n * n;
  if (thin <= 0) thin = n;
  ChainState state(spec, init, rng);
  if (state.det.singular()) throw numerical_error("run_chain: singular initial configuration");
  ChainRun run;
  run.burn_in = burn_in;
  run.thin = thin;
  for (long s = 0; s < burn_in; ++s) mcmc_step(spec, state);
  run.samples.reserve(static_cast<std::size_t>(std::max<long>(keep, 0)));
  for (long k = 0; k < keep; ++k) {
    for (long t = 0; t < thin; ++t) mcmc_step(spec, state);
    run.samples.push_back(state.det.config());
    run.logdet_trace.push_back(state.det.logabsdet());
  }
  run.proposed = state.proposed;
  run.accepted = state.accepted;
  return run;
}

/// Exact draw from the beta = 2 ensemble through the projection-kernel chain
/// rule: point k is sampled by rejection against mu from the conditional
/// density rho_p minus the projection onto the span of the already selected
/// rows. The rejection bound is 1.1 times the grid maximum of the current
/// conditional and is refreshed after every accepted point.
inline Configuration dpp_sample(const EnsembleSpec& spec, const Matrix& bound_grid, Rng& rng) {
  if (std::abs(spec.beta - 2.0) > 1e-12)
    throw config_error("dpp_sample: exact sampling requires beta = 2");
  if (!spec.basis.transform)
    throw config_error("dpp_sample: basis must be orthonormalized for (mu, p phi)");
  const int n = spec.basis.n_p;
  Matrix grid_rows = evaluation_matrix(spec.basis, *spec.domain, bound_grid);
  Vector grid_cond = grid_rows.rowwise().squaredNorm();
  Matrix span(n, n);  // orthonormal vectors spanning the selected rows
  Configuration config;
  config.p = spec.p;
  config.points.resize(n, spec.domain->model.ambient_dim());
  for (int k = 0; k < n; ++k) {
    double bound = 1.1 * grid_cond.maxCoeff();
    const long budget =
        2000 + 400 * static_cast<long>(std::ceil(bound / std::max(1, n - k)));
    long trials = 0;
    int bound_raises = 0;
    while (true) {
      if (++trials > budget) {
        if (++bound_raises > 8)
          throw numerical_error("dpp_sample: rejection budget exhausted");
        bound *= 2.0;
        trials = 0;
      }
      const Vector x = sample_base(spec.measure, rng);
      Vector v = weighted_row(spec.basis, *spec.domain, x);
      double cond = v.squaredNorm();
      if (k > 0) cond -= (span.topRows(k) * v).squaredNorm();
      cond = std::max(cond, 0.0);
      if (rng.uniform() * bound >= cond) continue;
      // accept: extend the orthonormal span and refresh grid conditionals
      if (k > 0) v -= span.topRows(k).transpose() * (span.topRows(k) * v);
      const double norm = v.norm();
      if (norm < 1e-14) continue;  // numerically inside the span, retry
      v /= norm;
      span.row(k) = v.transpose();
      grid_cond -= (grid_rows * v).cwiseAbs2();
      grid_cond = grid_cond.cwiseMax(0.0);
      config.points.row(k) = x.transpose();
      break;
    }
  }
  return config;
}

struct LbbEstimate {
  double estimate;
  double stderr_;
};

/// Monte-Carlo estimate of the total mass of |det|^2 against mu^{(N_p)} for
/// an orthonormalized basis; the target value is N_p!. Aggregation is done
/// with log-sum-exp for stability.
inline LbbEstimate lbb_check(const EnsembleSpec& spec, long samples, Rng& rng) {
  if (!spec.basis.transform)
    throw config_error("lbb_check: basis must be orthonormalized for (mu, p phi)");
  const int n = spec.basis.n_p;
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(samples));
  Matrix m(n, n);
  for (long s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i)
      m.row(i) = weighted_row(spec.basis, *spec.domain, sample_base(spec.measure, rng)).transpose();
    const LogDet d = logdet_of_matrix(m);
    log_terms.push_back(d.sign == 0 ? kNegInf : 2.0 * d.logabsdet);
  }
  const auto lse = [](const std::vector<double>& t, double scale) {
    double hi = kNegInf;
    for (double v : t) hi = std::max(hi, scale * v);
    if (!std::isfinite(hi)) return kNegInf;
    double acc = 0.0;
    for (double v : t) acc += std::exp(scale * v - hi);
    return hi + std::log(acc);
  };
  const double log_m = std::log(static_cast<double>(samples));
  const double est = std::exp(lse(log_terms, 1.0) - log_m);
  const double m2 = std::exp(lse(log_terms, 2.0) - log_m);
  const double var = std::max(0.0, m2 - est * est);
  return {est, std::sqrt(var / static_cast<double>(samples))};
}

}  // namespace betaens
