#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "dynsamp/error.hpp"
#include "dynsamp/rng.hpp"
#include "dynsamp/sbm.hpp"

namespace dynsamp {

// Latent-position estimates X = U|S|^{1/2} from the top-magnitude eigenpairs
// of the adjacency matrix. Columns are ordered by descending |eigenvalue|;
// the signed eigenvalues themselves are kept so the indefinite inner product
// can be reconstructed per column.
struct Embedding {
  Eigen::MatrixXd x;
  Eigen::VectorXd eigenvalues;  // signed, |.| non-increasing
  int d_plus = 0;
  int d_minus = 0;
  int dropped_zeros = 0;  // requested dimensions discarded as numerically zero

  int d() const { return static_cast<int>(eigenvalues.size()); }
  Eigen::VectorXd signs() const {
    Eigen::VectorXd s(eigenvalues.size());
    for (Eigen::Index c = 0; c < eigenvalues.size(); ++c) s(c) = eigenvalues(c) >= 0 ? 1.0 : -1.0;
    return s;
  }
};

// Block latent positions recovered from a connectivity matrix B: rows satisfy
// nu_k^T diag(+1 x d_plus, -1 x d_minus) nu_l = B_kl. Columns are ordered with
// the positive-eigenvalue directions first so the diagonal signature applies.
struct LatentConfig {
  Eigen::MatrixXd nu;  // K x d
  Eigen::VectorXd eigenvalues;
  int d_plus = 0;
  int d_minus = 0;

  int d() const { return d_plus + d_minus; }
  Eigen::VectorXd ipq() const {
    Eigen::VectorXd s(d());
    for (int c = 0; c < d(); ++c) s(c) = c < d_plus ? 1.0 : -1.0;
    return s;
  }
};

struct EmbedConfig {
  int max_rank = 100;        // cap on the scree window used for the elbow
  int elbow_index = 1;       // which elbow to return when several exist
  int dense_threshold = 1500;
  double zero_tol = 1e-10;
  double residual_tol = 1e-8;  // relative to the spectral norm estimate
};

namespace detail {

// Fix each eigenvector's sign so its largest-magnitude entry is positive
// (first such index on ties). Embeddings become reproducible across solvers.
inline void canonicalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  double mag = std::abs(v(0));
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > mag) {
      mag = std::abs(v(i));
      best = i;
    }
  }
  if (v(best) < 0) v = -v;
}

struct TopSpectrum {
  Eigen::VectorXd values;   // signed, |.| non-increasing
  Eigen::MatrixXd vectors;  // matching columns, sign-canonical
};

inline std::vector<int> order_by_magnitude(const Eigen::VectorXd& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return std::abs(v(a)) > std::abs(v(b));
  });
  return idx;
}

inline TopSpectrum top_spectrum_dense(const Eigen::MatrixXd& a, int want) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) fail(errc::eigensolver_failure, "dense eigensolver did not converge");
  const std::vector<int> idx = order_by_magnitude(es.eigenvalues());
  const int m = std::min<int>(want, static_cast<int>(idx.size()));
  TopSpectrum out;
  out.values.resize(m);
  out.vectors.resize(a.rows(), m);
  for (int c = 0; c < m; ++c) {
    out.values(c) = es.eigenvalues()(idx[c]);
    out.vectors.col(c) = es.eigenvectors().col(idx[c]);
    canonicalize_sign(out.vectors.col(c));
  }
  return out;
}

// Compressed neighbor lists for the symmetric 0/1 adjacency.
struct SparseAdjacency {
  std::size_t n = 0;
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint32_t> neighbors;

  static SparseAdjacency build(const ObservedGraph& g) {
    SparseAdjacency a;
    a.n = g.n;
    std::vector<std::uint32_t> deg(g.n, 0);
    for (const Edge& e : g.edges) {
      ++deg[e.i];
      ++deg[e.j];
    }
    a.offsets.assign(g.n + 1, 0);
    for (std::size_t v = 0; v < g.n; ++v) a.offsets[v + 1] = a.offsets[v] + deg[v];
    a.neighbors.resize(a.offsets[g.n]);
    std::vector<std::uint64_t> cursor(a.offsets.begin(), a.offsets.end() - 1);
    for (const Edge& e : g.edges) {
      a.neighbors[cursor[e.i]++] = e.j;
      a.neighbors[cursor[e.j]++] = e.i;
    }
    return a;
  }

  void matvec(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.setZero(static_cast<Eigen::Index>(n));
    for (std::size_t v = 0; v < n; ++v) {
      double acc = 0.0;
      for (std::uint64_t t = offsets[v]; t < offsets[v + 1]; ++t) acc += x(neighbors[t]);
      y(static_cast<Eigen::Index>(v)) = acc;
    }
  }
};

// Lanczos with full reorthogonalization. Grows the Krylov basis until the
// `want` largest-magnitude Ritz pairs meet the residual tolerance (checked
// against true residuals before returning), injecting a fresh random
// direction whenever an invariant subspace is exhausted.
class Lanczos {
 public:
  explicit Lanczos(const SparseAdjacency& a)
      : a_(a), n_(static_cast<Eigen::Index>(a.n)), rng_(0x517cc1b727220a95ULL) {
    v_ = random_unit();
    w_.resize(n_);
  }

  // Extends the basis to `target` columns (capped at n).
  void extend(int target) {
    target = std::min<int>(target, static_cast<int>(n_));
    if (basis_.cols() < target) basis_.conservativeResize(n_, target);
    while (steps_ < target) {
      basis_.col(steps_) = v_;
      a_.matvec(v_, w_);
      if (steps_ > 0) w_ -= beta_.back() * basis_.col(steps_ - 1);
      alpha_.push_back(v_.dot(w_));
      w_ -= alpha_.back() * v_;
      reorthogonalize(steps_ + 1);
      double beta = w_.norm();
      ++steps_;
      if (steps_ == n_) break;
      if (beta <= 1e-12 * std::max(1.0, t_norm_bound())) {
        // Exact invariant subspace: restart the recurrence from a new
        // direction orthogonal to everything found so far.
        v_ = random_unit();
        reorthogonalize_vec(v_, steps_);
        const double nrm = v_.norm();
        if (nrm <= 1e-12) {  // basis already spans the whole space
          spanned_ = true;
          break;
        }
        v_ /= nrm;
        beta = 0.0;
      } else {
        v_ = w_ / beta;
      }
      beta_.push_back(beta);
    }
  }

  bool exhausted() const { return spanned_ || steps_ >= n_; }
  int steps() const { return steps_; }

  // Ritz pairs of the current tridiagonal, largest magnitude first, with the
  // standard |beta * last-component| residual bound per pair.
  void ritz(Eigen::VectorXd& values, Eigen::MatrixXd& tvecs, Eigen::VectorXd& bounds) const {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps_, steps_);
    for (int i = 0; i < steps_; ++i) {
      t(i, i) = alpha_[i];
      if (i + 1 < steps_) t(i, i + 1) = t(i + 1, i) = beta_[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    if (es.info() != Eigen::Success) fail(errc::eigensolver_failure, "tridiagonal eigensolver failed");
    const std::vector<int> idx = order_by_magnitude(es.eigenvalues());
    const double last_beta = steps_ < n_ && !beta_.empty() ? beta_.back() : 0.0;
    values.resize(steps_);
    tvecs.resize(steps_, steps_);
    bounds.resize(steps_);
    for (int c = 0; c < steps_; ++c) {
      values(c) = es.eigenvalues()(idx[c]);
      tvecs.col(c) = es.eigenvectors().col(idx[c]);
      bounds(c) = std::abs(last_beta * tvecs(steps_ - 1, c));
    }
  }

  Eigen::MatrixXd assemble(const Eigen::MatrixXd& tvecs, int count) const {
    Eigen::MatrixXd y = basis_.leftCols(steps_) * tvecs.leftCols(count);
    for (int c = 0; c < count; ++c) canonicalize_sign(y.col(c));
    return y;
  }

  // True residuals ||A y - theta y|| for assembled Ritz vectors.
  Eigen::VectorXd residuals(const Eigen::MatrixXd& y, const Eigen::VectorXd& values) const {
    Eigen::VectorXd r(y.cols());
    Eigen::VectorXd ay(n_);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      Eigen::VectorXd col = y.col(c);
      a_.matvec(col, ay);
      r(c) = (ay - values(c) * col).norm() / std::max(col.norm(), 1e-300);
    }
    return r;
  }

 private:
  Eigen::VectorXd random_unit() {
    Eigen::VectorXd v(n_);
    for (Eigen::Index i = 0; i < n_; ++i) v(i) = 2.0 * rng_.next_unit() - 1.0;
    const double nrm = v.norm();
    return v / (nrm > 0 ? nrm : 1.0);
  }

  double t_norm_bound() const {
    double m = 0.0;
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      double row = std::abs(alpha_[i]);
      if (i > 0) row += std::abs(beta_[i - 1]);
      if (i < beta_.size()) row += std::abs(beta_[i]);
      m = std::max(m, row);
    }
    return m;
  }

  void reorthogonalize_vec(Eigen::VectorXd& x, int cols) const {
    for (int pass = 0; pass < 2; ++pass)
      x.noalias() -= basis_.leftCols(cols) * (basis_.leftCols(cols).transpose() * x);
  }

  void reorthogonalize(int cols) { reorthogonalize_vec(w_, cols); }

  const SparseAdjacency& a_;
  Eigen::Index n_;
  Rng rng_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd v_, w_;
  std::vector<double> alpha_, beta_;
  int steps_ = 0;
  bool spanned_ = false;
};

inline Eigen::MatrixXd adjacency_dense(const ObservedGraph& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.n),
                                            static_cast<Eigen::Index>(g.n));
  for (const Edge& e : g.edges) a(e.i, e.j) = a(e.j, e.i) = 1.0;
  return a;
}

}  // namespace detail

// Zhu-Ghodsi profile-likelihood elbow. Splits the magnitude-ordered scree
// values into two Gaussian segments with a common variance and returns the
// split maximizing the profile log-likelihood (smallest split on ties). With
// elbow_index > 1 the scan is repeated on the tail past the previous elbow.
inline int select_dimension(const Eigen::VectorXd& values, int max_rank, int elbow_index = 1) {
  if (values.size() < 2) fail(errc::too_few_values, "elbow scan needs at least 2 values");
  if (max_rank < 1 || max_rank > values.size())
    fail(errc::too_few_values, "max_rank must lie in [1, number of values]");
  if (elbow_index < 1) fail(errc::bad_config, "elbow_index must be >= 1");

  std::vector<double> x(max_rank);
  for (int i = 0; i < max_rank; ++i) x[i] = std::abs(values(i));

  const auto scan = [](const double* v, int m) {
    int best_q = 1;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int q = 1; q < m; ++q) {
      double mu1 = 0.0, mu2 = 0.0;
      for (int i = 0; i < q; ++i) mu1 += v[i];
      for (int i = q; i < m; ++i) mu2 += v[i];
      mu1 /= q;
      mu2 /= m - q;
      double ss = 0.0;
      for (int i = 0; i < q; ++i) ss += (v[i] - mu1) * (v[i] - mu1);
      for (int i = q; i < m; ++i) ss += (v[i] - mu2) * (v[i] - mu2);
      const double sigma2 = std::max(ss / m, 1e-100);
      const double ll = -0.5 * m * std::log(2.0 * M_PI * sigma2) - ss / (2.0 * sigma2);
      if (ll > best_ll) {
        best_ll = ll;
        best_q = q;
      }
    }
    return best_q;
  };

  int base = 0;
  for (int e = 0; e < elbow_index; ++e) {
    const int m = max_rank - base;
    if (m < 2) break;  // no further elbow available; keep the last one
    base += scan(x.data() + base, m);
  }
  return base;
}

// Spectral decomposition of B with zero eigenvalues dropped and the positive
// directions moved in front, so nu * diag(signature) * nu^T == B.
inline LatentConfig latent_from_block_model(const BlockModel& model) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.b);
  if (es.info() != Eigen::Success) fail(errc::eigensolver_failure, "eigendecomposition of B failed");
  const std::vector<int> order = detail::order_by_magnitude(es.eigenvalues());
  std::vector<int> pos, neg;
  for (int c : order) {
    const double lam = es.eigenvalues()(c);
    if (std::abs(lam) < 1e-10) continue;
    (lam > 0 ? pos : neg).push_back(c);
  }
  LatentConfig out;
  out.d_plus = static_cast<int>(pos.size());
  out.d_minus = static_cast<int>(neg.size());
  const int d = out.d_plus + out.d_minus;
  out.nu.resize(model.k, d);
  out.eigenvalues.resize(d);
  pos.insert(pos.end(), neg.begin(), neg.end());
  for (int c = 0; c < d; ++c) {
    const double lam = es.eigenvalues()(pos[c]);
    Eigen::VectorXd u = es.eigenvectors().col(pos[c]);
    detail::canonicalize_sign(u);
    out.nu.col(c) = u * std::sqrt(std::abs(lam));
    out.eigenvalues(c) = lam;
  }
  return out;
}

namespace detail {

inline Embedding embedding_from_spectrum(const Eigen::VectorXd& values,
                                         const Eigen::MatrixXd& vectors, int d, double zero_tol) {
  int keep = 0;
  while (keep < d && std::abs(values(keep)) >= zero_tol) ++keep;
  Embedding out;
  out.dropped_zeros = d - keep;
  if (keep == 0) fail(errc::eigensolver_failure, "all requested eigenvalues are numerically zero");
  out.eigenvalues = values.head(keep);
  out.x.resize(vectors.rows(), keep);
  for (int c = 0; c < keep; ++c) {
    out.x.col(c) = vectors.col(c) * std::sqrt(std::abs(values(c)));
    if (values(c) > 0)
      ++out.d_plus;
    else
      ++out.d_minus;
  }
  return out;
}

// Iterative path shared by ase() and embed_auto(). `pick` maps the current
// magnitude-ordered Ritz values to the number of leading pairs wanted; the
// basis grows until those pairs pass the residual tolerance.
template <typename Pick>
Embedding embed_lanczos(const ObservedGraph& g, const EmbedConfig& cfg, int scree_width, Pick pick) {
  const SparseAdjacency adj = SparseAdjacency::build(g);
  Lanczos lan(adj);
  int target = std::min<int>(static_cast<int>(g.n), scree_width + 30);
  Eigen::VectorXd values, bounds;
  Eigen::MatrixXd tvecs;
  for (;;) {
    lan.extend(target);
    lan.ritz(values, tvecs, bounds);
    const int avail = static_cast<int>(values.size());
    const int want = std::min(pick(values, std::min(scree_width, avail)), avail);
    const double anorm = std::max(std::abs(values(0)), 1.0);
    bool ok = true;
    for (int c = 0; c < want && ok; ++c) ok = bounds(c) <= cfg.residual_tol * anorm;
    if (ok) {
      Eigen::MatrixXd y = lan.assemble(tvecs, want);
      const Eigen::VectorXd res = lan.residuals(y, values.head(want));
      if ((res.array() <= cfg.residual_tol * anorm).all())
        return embedding_from_spectrum(values.head(want), y, want, cfg.zero_tol);
    }
    if (lan.exhausted())
      fail(errc::eigensolver_failure, "Lanczos exhausted the space without converging");
    target = std::min<int>(static_cast<int>(g.n), target + 40);
  }
}

}  // namespace detail

// X = U|S|^{1/2} from the d largest-magnitude eigenpairs of the adjacency
// matrix (used as-is, no diagonal augmentation).
inline Embedding ase(const ObservedGraph& g, int d, const EmbedConfig& cfg = {}) {
  if (g.n < 2 || g.edges.empty()) fail(errc::empty_graph, "graph has no edges");
  if (d < 1 || d >= static_cast<int>(g.n))
    fail(errc::dimension_too_large, "embedding dimension must satisfy 1 <= d < n");
  if (g.n <= static_cast<std::size_t>(cfg.dense_threshold) || 3 * d >= static_cast<int>(g.n)) {
    const auto spec = detail::top_spectrum_dense(detail::adjacency_dense(g), d);
    return detail::embedding_from_spectrum(spec.values, spec.vectors, d, cfg.zero_tol);
  }
  return detail::embed_lanczos(g, cfg, d, [d](const Eigen::VectorXd&, int) { return d; });
}

// ASE with the dimension chosen by the profile-likelihood elbow over the
// leading max_rank eigenvalue magnitudes. On the iterative path the scree is
// made of Ritz estimates; the retained pairs themselves are converged to the
// residual tolerance before use.
inline Embedding embed_auto(const ObservedGraph& g, const EmbedConfig& cfg = {}) {
  if (g.n < 2 || g.edges.empty()) fail(errc::empty_graph, "graph has no edges");
  const int scree = std::min<int>(cfg.max_rank, static_cast<int>(g.n) - 1);
  if (scree < 2) {
    return ase(g, 1, cfg);
  }
  if (g.n <= static_cast<std::size_t>(cfg.dense_threshold)) {
    const auto spec = detail::top_spectrum_dense(detail::adjacency_dense(g), scree);
    Eigen::VectorXd mags = spec.values.cwiseAbs();
    const int d = select_dimension(mags, static_cast<int>(mags.size()), cfg.elbow_index);
    return detail::embedding_from_spectrum(spec.values, spec.vectors, d, cfg.zero_tol);
  }
  const int elbow_index = cfg.elbow_index;
  return detail::embed_lanczos(g, cfg, scree, [elbow_index](const Eigen::VectorXd& vals, int m) {
    if (m < 2) return 1;
    return select_dimension(vals.cwiseAbs(), m, elbow_index);
  });
}

}  // namespace dynsamp
