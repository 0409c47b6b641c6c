#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dynsamp/error.hpp"
#include "dynsamp/rng.hpp"

namespace dynsamp {

struct GmmConfig {
  int restarts = 10;
  int max_iters = 300;
  double tol = 1e-6;          // relative log-likelihood change
  double ridge_scale = 1e-6;  // ridge = scale * trace(cov)/d, escalated on failure
};

struct MixtureFit {
  int k_hat = 0;
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;  // k_hat x d
  std::vector<Eigen::MatrixXd> covariances;
  std::vector<int> labels;  // argmax responsibilities, 0-based
  double loglik = 0.0;
  double bic = 0.0;
  std::vector<double> loglik_trace;  // winning restart's EM path
};

namespace detail {

struct EmState {
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;
  std::vector<Eigen::MatrixXd> covs;
};

inline Eigen::MatrixXd global_covariance(const Eigen::MatrixXd& x, double ridge_scale) {
  const Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::MatrixXd c = (x.rowwise() - mu).transpose() * (x.rowwise() - mu) / std::max<double>(1, x.rows() - 1);
  const double d = static_cast<double>(x.cols());
  c.diagonal().array() += std::max(ridge_scale * c.trace() / d, 1e-12);
  return c;
}

inline EmState seed_kmeanspp(const Eigen::MatrixXd& x, int k, Rng& rng, double ridge_scale) {
  const Eigen::Index n = x.rows();
  EmState s;
  s.means.resize(k, x.cols());
  s.means.row(0) = x.row(static_cast<Eigen::Index>(rng.below(n)));
  Eigen::VectorXd dist2 = (x.rowwise() - s.means.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index pick;
    if (total <= 0) {
      pick = static_cast<Eigen::Index>(rng.below(n));  // all remaining points identical
    } else {
      std::vector<double> w(dist2.data(), dist2.data() + n);
      pick = static_cast<Eigen::Index>(rng.categorical(cumulative_weights(w)));
    }
    s.means.row(c) = x.row(pick);
    dist2 = dist2.cwiseMin((x.rowwise() - s.means.row(c)).rowwise().squaredNorm());
  }
  s.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  s.covs.assign(k, global_covariance(x, ridge_scale));
  return s;
}

// Cholesky with escalating diagonal ridge; throws once regularization stops
// helping.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(Eigen::MatrixXd& cov, double ridge_scale) {
  const double d = static_cast<double>(cov.rows());
  double ridge = std::max(ridge_scale * cov.trace() / d, 1e-300);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success && std::isfinite(llt.matrixLLT()(0, 0))) return llt;
    cov.diagonal().array() += ridge;
    ridge *= 10.0;
  }
  fail(errc::singular_covariance, "covariance not positive definite after regularization");
}

struct EmResult {
  EmState state;
  Eigen::MatrixXd resp;  // n x k
  double loglik = std::numeric_limits<double>::lowest();
  std::vector<double> trace;
  bool ok = false;
};

inline EmResult run_em(const Eigen::MatrixXd& x, int k, std::uint64_t seed, const GmmConfig& cfg) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Rng rng(seed);
  EmResult r;
  r.state = seed_kmeanspp(x, k, rng, cfg.ridge_scale);
  Eigen::MatrixXd logdens(n, k);
  Eigen::MatrixXd xc(n, d);
  std::vector<int> deaths(k, 0);
  double prev = std::numeric_limits<double>::lowest();
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // E-step in log space.
    for (int c = 0; c < k; ++c) {
      Eigen::MatrixXd cov = r.state.covs[c];
      const auto llt = robust_llt(cov, cfg.ridge_scale);
      r.state.covs[c] = cov;
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
      xc = x.rowwise() - r.state.means.row(c);
      const Eigen::MatrixXd z = llt.matrixL().solve(xc.transpose());
      logdens.col(c) = -0.5 * (z.colwise().squaredNorm().array() + d * std::log(2.0 * M_PI) + logdet) +
                       std::log(std::max(r.state.weights(c), 1e-300));
    }
    const Eigen::VectorXd rowmax = logdens.rowwise().maxCoeff();
    const Eigen::MatrixXd shifted = (logdens.colwise() - rowmax).array().exp();
    const Eigen::VectorXd rowsum = shifted.rowwise().sum();
    r.resp = shifted.array().colwise() / rowsum.array();
    const double ll = (rowmax.array() + rowsum.array().log()).sum();
    r.trace.push_back(ll);

    if (iter > 0 && std::abs(ll - prev) <= cfg.tol * (std::abs(prev) + 1e-12)) {
      r.loglik = ll;
      r.ok = true;
      return r;
    }
    prev = ll;

    // M-step.
    Eigen::VectorXd nk = r.resp.colwise().sum();
    for (int c = 0; c < k; ++c) {
      if (nk(c) < 1e-10) {
        // Reseed a dead component at the point the current model explains
        // worst; a second death of the same component aborts this restart.
        if (++deaths[c] > 1) return r;
        Eigen::Index worst;
        (rowmax.array() + rowsum.array().log()).minCoeff(&worst);
        r.state.means.row(c) = x.row(worst);
        r.state.covs[c] = global_covariance(x, cfg.ridge_scale);
        r.state.weights(c) = 1.0 / static_cast<double>(n);
        nk(c) = 1.0;
        continue;
      }
      r.state.means.row(c) = r.resp.col(c).transpose() * x / nk(c);
      xc = x.rowwise() - r.state.means.row(c);
      Eigen::MatrixXd cov =
          xc.transpose() * (xc.array().colwise() * r.resp.col(c).array()).matrix() / nk(c);
      cov = 0.5 * (cov + cov.transpose());
      r.state.covs[c] = cov;
      r.state.weights(c) = nk(c) / static_cast<double>(n);
    }
    r.state.weights /= r.state.weights.sum();
  }
  r.loglik = prev;
  r.ok = true;  // hit max_iters; still a usable fit
  return r;
}

inline int gmm_param_count(int k, int d) { return (k - 1) + k * d + k * d * (d + 1) / 2; }

}  // namespace detail

// EM over full-covariance Gaussian mixtures for each K in [k_min, k_max],
// picking K by BIC = -2 loglik + params ln(n). Deterministic per seed; the
// restarts of one K differ only in their derived seeds.
inline MixtureFit fit_gmm(const Eigen::MatrixXd& x, int k_min, int k_max, std::uint64_t seed,
                          const GmmConfig& cfg = {}) {
  const Eigen::Index n = x.rows();
  const int d = static_cast<int>(x.cols());
  if (k_min < 1 || k_max < k_min) fail(errc::bad_config, "bad component range");
  if (n <= static_cast<Eigen::Index>(k_max) * (d + 1))
    fail(errc::too_few_points, "need n > k_max*(d+1) points, have " + std::to_string(n));

  MixtureFit best;
  best.bic = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int k = k_min; k <= k_max; ++k) {
    detail::EmResult top;
    for (int restart = 0; restart < cfg.restarts; ++restart) {
      detail::EmResult r;
      // A restart aborted by repeated component death is retried with a
      // fresh derived seed a few times before being skipped.
      for (int attempt = 0; attempt < 3 && !r.ok; ++attempt)
        r = detail::run_em(x, k, derive_seed(seed, {static_cast<std::uint64_t>(k),
                                                    static_cast<std::uint64_t>(restart),
                                                    static_cast<std::uint64_t>(attempt)}),
                           cfg);
      if (r.ok && r.loglik > top.loglik) top = std::move(r);
    }
    if (!top.ok) continue;

    // Argmax labels. A component may end up with soft mass but no argmax
    // points; the fit stays valid, it just uses fewer effective clusters.
    std::vector<int> labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index arg;
      top.resp.row(i).maxCoeff(&arg);
      labels[i] = static_cast<int>(arg);
    }

    const double bic = -2.0 * top.loglik + detail::gmm_param_count(k, d) * std::log(static_cast<double>(n));
    if (bic < best.bic) {
      best.k_hat = k;
      best.weights = top.state.weights;
      best.means = top.state.means;
      best.covariances = top.state.covs;
      best.labels = std::move(labels);
      best.loglik = top.loglik;
      best.bic = bic;
      best.loglik_trace = std::move(top.trace);
      found = true;
    }
  }
  if (!found) fail(errc::singular_covariance, "no stable mixture fit in the requested range");
  return best;
}

// Adjusted Rand index from the contingency table. The pair-count sums stay in
// integer arithmetic, so the result is the exact rational value rounded once.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) fail(errc::length_mismatch, "label vectors differ in length");
  const std::size_t n = a.size();
  if (n < 2) fail(errc::too_few_points, "ARI needs at least 2 points");
  std::map<std::pair<int, int>, std::int64_t> cells;
  std::map<int, std::int64_t> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    ++cells[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  const auto choose2 = [](std::int64_t m) { return m * (m - 1) / 2; };
  __int128 sij = 0, sa = 0, sb = 0;
  for (const auto& [key, c] : cells) sij += choose2(c);
  for (const auto& [key, c] : rows) sa += choose2(c);
  for (const auto& [key, c] : cols) sb += choose2(c);
  const __int128 n2 = choose2(static_cast<std::int64_t>(n));
  const __int128 num = 2 * (n2 * sij - sa * sb);
  const __int128 den = n2 * (sa + sb) - 2 * sa * sb;
  if (den == 0) return 1.0;  // both partitions trivial and identical
  return static_cast<double>(num) / static_cast<double>(den);
}

// Drops mixture components that attract no argmax points, remapping labels to
// the surviving components in order. loglik/bic keep the original fit's
// values; k_hat and the per-component fields shrink.
inline MixtureFit drop_empty_components(const MixtureFit& fit) {
  std::vector<int> counts(fit.k_hat, 0);
  for (int lab : fit.labels) ++counts[lab];
  std::vector<int> remap(fit.k_hat, -1);
  int kept = 0;
  for (int c = 0; c < fit.k_hat; ++c)
    if (counts[c] > 0) remap[c] = kept++;
  if (kept == fit.k_hat) return fit;

  MixtureFit out;
  out.k_hat = kept;
  out.weights.resize(kept);
  out.means.resize(kept, fit.means.cols());
  out.covariances.reserve(kept);
  for (int c = 0; c < fit.k_hat; ++c) {
    if (remap[c] < 0) continue;
    out.weights(remap[c]) = fit.weights(c);
    out.means.row(remap[c]) = fit.means.row(c);
    out.covariances.push_back(fit.covariances[c]);
  }
  out.weights /= out.weights.sum();
  out.labels.reserve(fit.labels.size());
  for (int lab : fit.labels) out.labels.push_back(remap[lab]);
  out.loglik = fit.loglik;
  out.bic = fit.bic;
  out.loglik_trace = fit.loglik_trace;
  return out;
}

struct BlockEstimate {
  Eigen::MatrixXd b;
  Eigen::VectorXd pi;
};

// Recovers (B_hat, pi_hat) from a mixture fit on an embedding: B_hat[k,l] is
// the indefinite inner product of the component means (clamped into (0,1));
// pi_hat is the empirical label frequency.
inline BlockEstimate estimate_block_model(const MixtureFit& fit, const Eigen::VectorXd& signs) {
  if (signs.size() != fit.means.cols())
    fail(errc::dimension_mismatch, "signature length does not match mean dimension");
  constexpr double eps_b = 1e-6;
  BlockEstimate out;
  out.b = fit.means * signs.asDiagonal() * fit.means.transpose();
  out.b = out.b.cwiseMax(eps_b).cwiseMin(1.0 - eps_b);
  out.b = 0.5 * (out.b + out.b.transpose());  // clamp keeps symmetry; belt and braces
  out.pi = Eigen::VectorXd::Zero(fit.k_hat);
  for (int lab : fit.labels) out.pi(lab) += 1.0;
  out.pi /= static_cast<double>(fit.labels.size());
  return out;
}

inline BlockEstimate estimate_block_model(const MixtureFit& fit, int d_plus, int d_minus) {
  if (d_plus + d_minus != fit.means.cols())
    fail(errc::dimension_mismatch, "signature does not match mean dimension");
  Eigen::VectorXd s(d_plus + d_minus);
  for (int c = 0; c < d_plus + d_minus; ++c) s(c) = c < d_plus ? 1.0 : -1.0;
  return estimate_block_model(fit, s);
}

}  // namespace dynsamp
