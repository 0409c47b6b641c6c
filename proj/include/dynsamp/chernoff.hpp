#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dynsamp/error.hpp"
#include "dynsamp/sbm.hpp"
#include "dynsamp/spectral.hpp"

namespace dynsamp {

struct OptConfig {
  int grid_points = 999;  // dense bracket before golden-section refinement
  double t_tol = 1e-8;    // width of the final t bracket
  double tie_tol = 1e-9;  // two pairwise values closer than this flag a tie
};

struct PairStat {
  double value = 0.0;
  double t_star = 0.5;
};

struct ChernoffReport {
  double rho = 0.0;
  Eigen::MatrixXd c;       // pairwise statistics, symmetric, diagonal zero
  Eigen::MatrixXd t_star;  // maximizing t per ordered pair; t(l,k) = 1 - t(k,l)
  int active_k = 0;        // argmin pair, 0-based, active_k < active_l
  int active_l = 1;
  bool tie = false;  // another pair matched the minimum within tie_tol
};

namespace detail {

// Everything pairwise statistics need, derived once per (B, pi).
struct ChernoffContext {
  LatentConfig latent;
  Eigen::VectorXd pi;
  Eigen::MatrixXd ip;  // indefinite inner products nu_k' I nu_l (== B for valid B)
  Eigen::MatrixXd delta_inv;
  std::vector<Eigen::MatrixXd> sigma;
};

inline Eigen::MatrixXd invert_spd_checked(const Eigen::MatrixXd& m, errc code, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) fail(code, std::string(what) + ": eigensolver failure");
  const double max_ev = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-12 * max_ev)
    fail(code, std::string(what) + " is numerically singular");
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

inline ChernoffContext make_context(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi) {
  const BlockModel model = make_block_model(b, pi);
  ChernoffContext ctx;
  ctx.latent = latent_from_block_model(model);
  ctx.pi = pi;
  const Eigen::VectorXd s = ctx.latent.ipq();
  ctx.ip = ctx.latent.nu * s.asDiagonal() * ctx.latent.nu.transpose();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(ctx.latent.d(), ctx.latent.d());
  for (int k = 0; k < model.k; ++k)
    delta.noalias() += pi(k) * ctx.latent.nu.row(k).transpose() * ctx.latent.nu.row(k);
  ctx.delta_inv = invert_spd_checked(delta, errc::singular_delta, "second-moment matrix");
  ctx.sigma.reserve(model.k);
  for (int k = 0; k < model.k; ++k) {
    Eigen::MatrixXd mid = Eigen::MatrixXd::Zero(ctx.latent.d(), ctx.latent.d());
    for (int l = 0; l < model.k; ++l) {
      const double p_edge = ctx.ip(k, l);
      mid.noalias() +=
          pi(l) * p_edge * (1.0 - p_edge) * ctx.latent.nu.row(l).transpose() * ctx.latent.nu.row(l);
    }
    Eigen::MatrixXd sig = s.asDiagonal() * ctx.delta_inv * mid * ctx.delta_inv * s.asDiagonal();
    ctx.sigma.push_back(0.5 * (sig + sig.transpose()));
  }
  return ctx;
}

inline double pair_objective(const Eigen::VectorXd& diff, const Eigen::MatrixXd& sk,
                             const Eigen::MatrixXd& sl, double t) {
  const Eigen::MatrixXd st = t * sk + (1.0 - t) * sl;
  Eigen::LLT<Eigen::MatrixXd> llt(st);
  if (llt.info() != Eigen::Success)
    fail(errc::singular_sigma, "interpolated covariance not positive definite");
  return t * (1.0 - t) * diff.dot(llt.solve(diff));
}

// Dense grid to bracket the supremum, then golden-section refinement inside
// the best cell. Returns the best value seen anywhere, so refinement can only
// improve on the grid.
template <typename F>
PairStat maximize_on_unit_interval(F&& f, const OptConfig& cfg) {
  const int g = cfg.grid_points;
  PairStat best{-std::numeric_limits<double>::infinity(), 0.5};
  for (int i = 1; i <= g; ++i) {
    const double t = static_cast<double>(i) / (g + 1);
    const double v = f(t);
    if (v > best.value) best = {v, t};
  }
  constexpr double edge = 1e-12;
  double lo = std::max(best.t_star - 1.0 / (g + 1), edge);
  double hi = std::min(best.t_star + 1.0 / (g + 1), 1.0 - edge);
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > cfg.t_tol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    }
    const double fb = std::max(f1, f2);
    const double tb = f1 >= f2 ? x1 : x2;
    if (fb > best.value) best = {fb, tb};
  }
  return best;
}

inline PairStat pair_stat(const ChernoffContext& ctx, int k, int l, const OptConfig& cfg) {
  const Eigen::VectorXd diff = ctx.latent.nu.row(k) - ctx.latent.nu.row(l);
  if (diff.norm() == 0.0) return {0.0, 0.5};
  const Eigen::MatrixXd& sk = ctx.sigma[k];
  const Eigen::MatrixXd& sl = ctx.sigma[l];
  return maximize_on_unit_interval(
      [&](double t) { return pair_objective(diff, sk, sl, t); }, cfg);
}

inline ChernoffReport report_from_context(const ChernoffContext& ctx, const OptConfig& cfg) {
  const int k_blocks = static_cast<int>(ctx.pi.size());
  if (k_blocks < 2) fail(errc::bad_config, "pairwise statistics need at least 2 blocks");
  ChernoffReport rep;
  rep.c = Eigen::MatrixXd::Zero(k_blocks, k_blocks);
  rep.t_star = Eigen::MatrixXd::Constant(k_blocks, k_blocks, 0.5);
  rep.rho = std::numeric_limits<double>::infinity();
  for (int k = 0; k < k_blocks; ++k) {
    for (int l = k + 1; l < k_blocks; ++l) {
      const PairStat ps = pair_stat(ctx, k, l, cfg);
      rep.c(k, l) = rep.c(l, k) = ps.value;
      rep.t_star(k, l) = ps.t_star;
      rep.t_star(l, k) = 1.0 - ps.t_star;
      if (ps.value < rep.rho) {
        rep.rho = ps.value;
        rep.active_k = k;
        rep.active_l = l;
      }
    }
  }
  for (int k = 0; k < k_blocks; ++k)
    for (int l = k + 1; l < k_blocks; ++l)
      if ((k != rep.active_k || l != rep.active_l) && rep.c(k, l) - rep.rho < cfg.tie_tol)
        rep.tie = true;
  return rep;
}

}  // namespace detail

// Second-moment matrix of the block latent positions under pi.
inline Eigen::MatrixXd delta_matrix(const LatentConfig& latent, const Eigen::VectorXd& pi) {
  if (pi.size() != latent.nu.rows()) fail(errc::dimension_mismatch, "pi length != block count");
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(latent.d(), latent.d());
  for (Eigen::Index k = 0; k < pi.size(); ++k)
    delta.noalias() += pi(k) * latent.nu.row(k).transpose() * latent.nu.row(k);
  return delta;
}

// Limiting covariance of the embedding rows conditioned on block k.
inline Eigen::MatrixXd sigma_block(const LatentConfig& latent, const Eigen::VectorXd& pi, int k) {
  if (pi.size() != latent.nu.rows()) fail(errc::dimension_mismatch, "pi length != block count");
  if (k < 0 || k >= latent.nu.rows()) fail(errc::bad_config, "block index out of range");
  const Eigen::MatrixXd delta_inv =
      detail::invert_spd_checked(delta_matrix(latent, pi), errc::singular_delta, "second-moment matrix");
  const Eigen::VectorXd s = latent.ipq();
  Eigen::MatrixXd mid = Eigen::MatrixXd::Zero(latent.d(), latent.d());
  for (Eigen::Index l = 0; l < pi.size(); ++l) {
    const double p_edge = latent.nu.row(k) * s.asDiagonal() * latent.nu.row(l).transpose();
    mid.noalias() += pi(l) * p_edge * (1.0 - p_edge) * latent.nu.row(l).transpose() * latent.nu.row(l);
  }
  Eigen::MatrixXd sig = s.asDiagonal() * delta_inv * mid * delta_inv * s.asDiagonal();
  return 0.5 * (sig + sig.transpose());
}

// Pairwise separation statistic: sup over t of the scaled Mahalanobis
// distance between blocks k and l under the interpolated covariance.
inline PairStat chernoff_pair(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi, int k, int l,
                              const OptConfig& cfg = {}) {
  if (k == l) fail(errc::bad_config, "pair requires two distinct blocks");
  if (k < 0 || l < 0 || k >= b.rows() || l >= b.rows()) fail(errc::bad_config, "block index out of range");
  return detail::pair_stat(detail::make_context(b, pi), k, l, cfg);
}

// Variant keeping the log-determinant term and the explicit graph-size factor
// of the underlying large-sample expression. Diagnostic only.
inline PairStat chernoff_pair_exact(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi, int k,
                                    int l, double n_vertices, const OptConfig& cfg = {}) {
  if (k == l) fail(errc::bad_config, "pair requires two distinct blocks");
  const auto ctx = detail::make_context(b, pi);
  const Eigen::VectorXd diff = ctx.latent.nu.row(k) - ctx.latent.nu.row(l);
  const Eigen::MatrixXd& sk = ctx.sigma[k];
  const Eigen::MatrixXd& sl = ctx.sigma[l];
  const auto logdet = [](const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
      fail(errc::singular_sigma, "covariance not positive definite");
    double ld = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) ld += 2.0 * std::log(llt.matrixLLT()(i, i));
    return ld;
  };
  const double ldk = logdet(sk), ldl = logdet(sl);
  return detail::maximize_on_unit_interval(
      [&](double t) {
        const Eigen::MatrixXd st = t * sk + (1.0 - t) * sl;
        Eigen::LLT<Eigen::MatrixXd> llt(st);
        if (llt.info() != Eigen::Success)
          fail(errc::singular_sigma, "interpolated covariance not positive definite");
        double ld = 0.0;
        for (Eigen::Index i = 0; i < st.rows(); ++i) ld += 2.0 * std::log(llt.matrixLLT()(i, i));
        const double quad = diff.dot(llt.solve(diff));
        return 0.5 * n_vertices * t * (1.0 - t) * quad + 0.5 * (ld - t * ldk - (1.0 - t) * ldl);
      },
      cfg);
}

// All pairwise statistics, the minimum rho, and the argmin pair.
inline ChernoffReport chernoff_info(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi,
                                    const OptConfig& cfg = {}) {
  return detail::report_from_context(detail::make_context(b, pi), cfg);
}

inline bool is_superior(const Eigen::MatrixXd& b_a, const Eigen::MatrixXd& b_b,
                        const Eigen::VectorXd& pi, const OptConfig& cfg = {}) {
  if (b_a.rows() != b_b.rows()) fail(errc::dimension_mismatch, "matrices must share the block count");
  return chernoff_info(b_a, pi, cfg).rho > chernoff_info(b_b, pi, cfg).rho;
}

// How the inverse interpolated covariance of a uniformly thinned model
// relates to the unthinned one: a 1/p scaling minus an explicit low-rank
// correction. Exposes both sides of the identity plus the positive
// correction term h for verification.
struct ScaledInverseParts {
  Eigen::MatrixXd sigma_scaled;      // interpolated covariance computed from p*B
  Eigen::MatrixXd direct_inverse;    // straight inversion of sigma_scaled
  Eigen::MatrixXd woodbury_inverse;  // low-rank-update form of the same inverse
  double h = 0.0;                    // quadratic correction along nu_k - nu_l
};

inline ScaledInverseParts scaled_inverse_decomposition(const Eigen::MatrixXd& b,
                                                       const Eigen::VectorXd& pi, double p,
                                                       double t, int k, int l) {
  if (!(p > 0.0 && p < 1.0) || !(t > 0.0 && t < 1.0))
    fail(errc::bad_config, "p and t must lie in (0,1)");
  if (k == l || k < 0 || l < 0 || k >= b.rows() || l >= b.rows())
    fail(errc::bad_config, "bad block pair");
  const auto ctx = detail::make_context(b, pi);
  const auto ctx_scaled = detail::make_context(p * b, pi);
  const int kb = static_cast<int>(pi.size());

  ScaledInverseParts out;
  out.sigma_scaled = t * ctx_scaled.sigma[k] + (1.0 - t) * ctx_scaled.sigma[l];
  out.direct_inverse =
      detail::invert_spd_checked(out.sigma_scaled, errc::singular_sigma, "scaled covariance");

  const Eigen::MatrixXd sigma_t = t * ctx.sigma[k] + (1.0 - t) * ctx.sigma[l];
  const Eigen::MatrixXd sigma_t_inv =
      detail::invert_spd_checked(sigma_t, errc::singular_sigma, "covariance");
  const Eigen::VectorXd s = ctx.latent.ipq();
  const Eigen::MatrixXd v = ctx.latent.nu * ctx.delta_inv * s.asDiagonal();  // K x d
  Eigen::VectorXd d_diag(kb);
  for (int j = 0; j < kb; ++j)
    d_diag(j) = (1.0 - p) * pi(j) * (t * ctx.ip(k, j) + (1.0 - t) * ctx.ip(l, j));
  const Eigen::MatrixXd m = d_diag.cwiseInverse().asDiagonal().toDenseMatrix() +
                            (1.0 / p) * v * sigma_t_inv * v.transpose();
  const Eigen::MatrixXd m_inv = detail::invert_spd_checked(m, errc::singular_sigma, "update matrix");
  out.woodbury_inverse = (1.0 / p) * sigma_t_inv -
                         (1.0 / (p * p)) * sigma_t_inv * v.transpose() * m_inv * v * sigma_t_inv;

  const Eigen::VectorXd diff = ctx.latent.nu.row(k) - ctx.latent.nu.row(l);
  const Eigen::VectorXd x = v * sigma_t_inv * diff;
  out.h = (1.0 / p) * x.dot(m_inv * x);
  return out;
}

// ---- Sampling-scheme algebra over the budget fraction p1 ----

// Fixed quantities of a scheme at a given initial fraction p0: the initially
// active pair, the concentration cap p1_max, and the threshold p1_star where
// concentrating the whole increment stops being optimal.
struct SchemeInfo {
  Eigen::MatrixXd b0;
  int k_star = 0;
  int l_star = 1;
  bool tie = false;
  double s = 0.0;  // pi[k_star] + pi[l_star]
  double p1_max = 0.0;
  double p1_star = 0.0;
  bool pair_changed = false;  // argmin moved at p1_star (else p1_star == p1_max)
  int after_k = -1;
  int after_l = -1;

  double p11_max(double p0) const { return 1.0 - p0 - p1_star / (s * s) + p1_star; }
};

namespace detail {

inline Eigen::MatrixXd concentrated_matrix(const Eigen::MatrixXd& b, const Eigen::MatrixXd& b0,
                                           int k, int l, double amount) {
  Eigen::MatrixXd out = b0;
  out(k, k) += amount * b(k, k);
  out(l, l) += amount * b(l, l);
  out(k, l) += amount * b(k, l);
  if (k != l) out(l, k) += amount * b(l, k);
  return out;
}

inline std::pair<int, int> active_of(const Eigen::MatrixXd& m, const Eigen::VectorXd& pi,
                                     const OptConfig& cfg) {
  const ChernoffReport rep = chernoff_info(m, pi, cfg);
  return {rep.active_k, rep.active_l};
}

}  // namespace detail

// Scans p1 over (0, p1_max] for the first point where the argmin pair of the
// concentrated scheme moves away from the initially active pair, then bisects
// the bracketing cell. If the pair never moves, p1_star = p1_max.
inline SchemeInfo find_p1_star(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi, double p0,
                               const OptConfig& cfg = {}) {
  if (!(p0 > 0.0 && p0 < 1.0)) fail(errc::bad_config, "p0 must lie in (0,1)");
  SchemeInfo info;
  info.b0 = p0 * b;
  const ChernoffReport rep0 = chernoff_info(info.b0, pi, cfg);
  if (rep0.tie)
    fail(errc::nonunique_active_pair, "active pair not unique at zero incremental budget");
  info.k_star = rep0.active_k;
  info.l_star = rep0.active_l;
  info.tie = rep0.tie;
  info.s = pi(info.k_star) + pi(info.l_star);
  info.p1_max = (1.0 - p0) * info.s * info.s;
  const std::pair<int, int> initial{info.k_star, info.l_star};
  const double s2 = info.s * info.s;

  const int scan_points = 400;
  double prev = 0.0;
  for (int i = 1; i <= scan_points; ++i) {
    const double p1 = info.p1_max * i / scan_points;
    const Eigen::MatrixXd m = detail::concentrated_matrix(b, info.b0, info.k_star, info.l_star, p1 / s2);
    if (detail::active_of(m, pi, cfg) != initial) {
      double lo = prev, hi = p1;
      while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::MatrixXd mm =
            detail::concentrated_matrix(b, info.b0, info.k_star, info.l_star, mid / s2);
        (detail::active_of(mm, pi, cfg) == initial ? lo : hi) = mid;
      }
      info.p1_star = 0.5 * (lo + hi);
      info.pair_changed = true;
      const Eigen::MatrixXd after =
          detail::concentrated_matrix(b, info.b0, info.k_star, info.l_star, hi / s2);
      const auto pa = detail::active_of(after, pi, cfg);
      info.after_k = pa.first;
      info.after_l = pa.second;
      return info;
    }
    prev = p1;
  }
  info.p1_star = info.p1_max;
  return info;
}

struct SchemeMatrices {
  Eigen::MatrixXd b0;
  Eigen::MatrixXd b1;       // uniform increment: (p0 + p1) * B
  Eigen::MatrixXd b1_opt;   // concentrated increment, possibly past p1_star
  SchemeInfo info;
};

namespace detail {

inline Eigen::MatrixXd optimal_matrix(const Eigen::MatrixXd& b, const SchemeInfo& info, double p0,
                                      double p1) {
  const double s2 = info.s * info.s;
  Eigen::MatrixXd out;
  if (p1 <= info.p1_star) {
    out = concentrated_matrix(b, info.b0, info.k_star, info.l_star, p1 / s2);
  } else {
    if (p1 > info.p11_max(p0) + 1e-12)
      fail(errc::over_sampling, "p1 = " + std::to_string(p1) + " exceeds the spendable budget " +
                                    std::to_string(info.p11_max(p0)));
    out = info.b0 + (p1 - info.p1_star) * b;
    out = concentrated_matrix(b, out, info.k_star, info.l_star, info.p1_star / s2);
  }
  if (((out - b).array() > 1e-12).any())
    fail(errc::over_sampling, "scheme would sample a cell beyond its full connectivity");
  return out;
}

}  // namespace detail

inline SchemeMatrices scheme_matrices(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi,
                                      double p0, double p1, const OptConfig& cfg = {}) {
  if (!(p1 > 0.0)) fail(errc::bad_config, "p1 must be positive");
  SchemeMatrices out;
  out.info = find_p1_star(b, pi, p0, cfg);
  if (p1 <= out.info.p1_star && p1 > out.info.p1_max + 1e-12)
    fail(errc::over_sampling, "p1 exceeds the concentration cap");
  out.b0 = out.info.b0;
  out.b1 = (p0 + p1) * b;
  out.b1_opt = detail::optimal_matrix(b, out.info, p0, p1);
  return out;
}

struct SchemeCurve {
  Eigen::VectorXd p1_grid;
  Eigen::VectorXd rho_baseline;  // uniform increment
  Eigen::VectorXd rho_optimal;   // concentrated increment
  double rho_b = 0.0;
  double rho_b0 = 0.0;
  double p1_star = 0.0;
  double p1_max = 0.0;
  double p11_max = 0.0;
  int active_k = 0;
  int active_l = 1;
  bool pair_changed = false;
};

inline SchemeCurve scheme_curve(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi, double p0,
                                int grid_size, const OptConfig& cfg = {}) {
  if (grid_size < 1) fail(errc::bad_config, "grid_size must be >= 1");
  const SchemeInfo info = find_p1_star(b, pi, p0, cfg);
  SchemeCurve curve;
  curve.rho_b = chernoff_info(b, pi, cfg).rho;
  curve.rho_b0 = chernoff_info(info.b0, pi, cfg).rho;
  curve.p1_star = info.p1_star;
  curve.p1_max = info.p1_max;
  curve.p11_max = info.p11_max(p0);
  curve.active_k = info.k_star;
  curve.active_l = info.l_star;
  curve.pair_changed = info.pair_changed;
  curve.p1_grid.resize(grid_size);
  curve.rho_baseline.resize(grid_size);
  curve.rho_optimal.resize(grid_size);
  for (int i = 0; i < grid_size; ++i) {
    const double p1 = curve.p11_max * (i + 1) / grid_size;
    curve.p1_grid(i) = p1;
    curve.rho_baseline(i) = chernoff_info((p0 + p1) * b, pi, cfg).rho;
    curve.rho_optimal(i) = chernoff_info(detail::optimal_matrix(b, info, p0, p1), pi, cfg).rho;
  }
  return curve;
}

}  // namespace dynsamp
