#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dynsamp/chernoff.hpp"
#include "dynsamp/cluster.hpp"
#include "dynsamp/error.hpp"
#include "dynsamp/rng.hpp"
#include "dynsamp/sbm.hpp"
#include "dynsamp/spectral.hpp"

namespace dynsamp {

struct SamplingConfig {
  EmbedConfig embed;
  GmmConfig gmm;
  OptConfig opt;
  int k_min = 1;
  int k_max = 9;
};

struct SamplingOutcome {
  std::vector<int> tau_hat;  // final estimated block labels, 0-based
  int k_hat = 0;
  int d_hat = 0;
  EdgeBudget budget;  // pairs actually queried, split by phase
  int active_k = -1;  // concentration target (second algorithm only)
  int active_l = -1;
  bool fallback_uniform = false;  // initial clustering found a single block
  bool shortfall = false;         // remainder pool ran dry (extreme budgets)
  bool k_range_clamped = false;   // k_max reduced to fit the available points

  EdgeList observed_pairs() const {
    EdgeList all;
    all.reserve(budget.e0.size() + budget.e1.size() + budget.e11.size());
    all.insert(all.end(), budget.e0.begin(), budget.e0.end());
    all.insert(all.end(), budget.e1.begin(), budget.e1.end());
    all.insert(all.end(), budget.e11.begin(), budget.e11.end());
    std::sort(all.begin(), all.end());
    return all;
  }
};

namespace detail {

class PairMask {
 public:
  explicit PairMask(std::uint64_t bits) : words_((bits + 63) / 64, 0) {}
  bool test(std::uint64_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
  void set(std::uint64_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }

 private:
  std::vector<std::uint64_t> words_;
};

// Draws `count` distinct pairs uniformly from the unmarked part of a pair
// universe, marking them as it goes. Small requests use rejection sampling;
// once the request is a sizable fraction of what's left, a single ordered
// scan with selection sampling is cheaper and has bounded running time.
// `to_global` maps a universe index to the global colex pair index (identity
// for the full universe).
template <typename MapFn>
void draw_pairs(PairMask& mask, std::uint64_t universe, std::uint64_t complement,
                std::uint64_t count, Rng& rng, MapFn&& to_global, EdgeList& out) {
  if (count == 0) return;
  if (count > complement)
    fail(errc::count_exceeds_pool,
         "requested " + std::to_string(count) + " pairs from a pool of " + std::to_string(complement));
  if (count <= complement / 4) {
    std::uint64_t taken = 0;
    while (taken < count) {
      const std::uint64_t g = to_global(rng.below(universe));
      if (mask.test(g)) continue;
      mask.set(g);
      out.push_back(pair_at(g));
      ++taken;
    }
  } else {
    std::uint64_t remaining = complement;
    std::uint64_t need = count;
    for (std::uint64_t local = 0; local < universe && need > 0; ++local) {
      const std::uint64_t g = to_global(local);
      if (mask.test(g)) continue;
      if (rng.below(remaining) < need) {
        mask.set(g);
        out.push_back(pair_at(g));
        --need;
      }
      --remaining;
    }
  }
  std::sort(out.begin(), out.end());
}

inline void validate_pairs(const EdgeList& e0, std::size_t n) {
  for (const Edge& e : e0)
    if (!(e.i < e.j && e.j < n))
      fail(errc::bad_config, "initial pair set contains an invalid pair (" +
                                 std::to_string(e.i) + "," + std::to_string(e.j) + ")");
}

inline EdgeList merge_sorted(const EdgeList& a, const EdgeList& b) {
  EdgeList out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Clusters an observed graph end to end; k_max shrinks if the point count
// cannot support the full range with full covariances.
inline MixtureFit cluster_observed(const ObservedGraph& g, const SamplingConfig& cfg,
                                   std::uint64_t seed, Embedding& emb, bool& clamped) {
  emb = embed_auto(g, cfg.embed);
  int k_max = cfg.k_max;
  const Eigen::Index n = emb.x.rows();
  while (k_max > cfg.k_min && n <= static_cast<Eigen::Index>(k_max) * (emb.d() + 1)) {
    --k_max;
    clamped = true;
  }
  return fit_gmm(emb.x, cfg.k_min, k_max, seed, cfg.gmm);
}

}  // namespace detail

// Uniform draw of round(p0 * |pairs|) distinct vertex pairs; the usual way to
// build the initial observation set E0.
inline EdgeList sample_initial_pairs(std::size_t n, double p0, std::uint64_t seed) {
  if (!(p0 >= 0.0 && p0 < 1.0)) fail(errc::bad_config, "p0 must lie in [0,1)");
  const std::uint64_t universe = pair_count(n);
  const std::uint64_t count = round_count(p0 * static_cast<double>(universe));
  detail::PairMask mask(universe);
  Rng rng(seed);
  EdgeList out;
  out.reserve(count);
  detail::draw_pairs(mask, universe, universe, count, rng, [](std::uint64_t i) { return i; }, out);
  return out;
}

// Uniform dynamic sampling: spend the whole increment uniformly over the
// unobserved pairs, then embed and cluster the union.
inline SamplingOutcome algorithm1_uniform(const ObservedGraph& truth, const EdgeList& e0,
                                          double p1, std::uint64_t seed,
                                          const SamplingConfig& cfg = {}) {
  detail::validate_pairs(e0, truth.n);
  const std::uint64_t universe = pair_count(truth.n);
  const std::uint64_t target = round_count(p1 * static_cast<double>(universe));
  if (e0.size() + target > universe)
    fail(errc::budget_exceeded, "increment of " + std::to_string(target) +
                                    " pairs does not fit next to |E0| = " + std::to_string(e0.size()));
  SamplingOutcome out;
  out.budget.n = truth.n;
  out.budget.p1 = p1;
  out.budget.e0 = e0;

  detail::PairMask mask(universe);
  for (const Edge& e : e0) mask.set(pair_index(e.i, e.j));
  Rng rng(derive_seed(seed, {1}));
  detail::draw_pairs(mask, universe, universe - e0.size(), target, rng,
                     [](std::uint64_t i) { return i; }, out.budget.e1);

  const ObservedGraph observed = restrict_graph(truth, detail::merge_sorted(e0, out.budget.e1));
  Embedding emb;
  const MixtureFit fit = detail::cluster_observed(observed, cfg, derive_seed(seed, {4}), emb,
                                                  out.k_range_clamped);
  out.tau_hat = fit.labels;
  out.k_hat = fit.k_hat;
  out.d_hat = emb.d();
  return out;
}

// Concentrated dynamic sampling: cluster the initial graph, find the pair of
// blocks hardest to separate, spend as much of the increment as allowed on
// unobserved pairs inside those two blocks, and spread the remainder
// uniformly.
inline SamplingOutcome algorithm2_chernoff(const ObservedGraph& truth, const EdgeList& e0,
                                           double p1, std::uint64_t seed,
                                           const SamplingConfig& cfg = {}) {
  detail::validate_pairs(e0, truth.n);
  const std::uint64_t universe = pair_count(truth.n);
  const std::uint64_t target = round_count(p1 * static_cast<double>(universe));
  if (e0.size() + target > universe)
    fail(errc::budget_exceeded, "increment of " + std::to_string(target) +
                                    " pairs does not fit next to |E0| = " + std::to_string(e0.size()));
  SamplingOutcome out;
  out.budget.n = truth.n;
  out.budget.p1 = p1;
  out.budget.e0 = e0;

  const ObservedGraph observed0 = restrict_graph(truth, e0);
  Embedding emb0;
  const MixtureFit fit0 = drop_empty_components(detail::cluster_observed(
      observed0, cfg, derive_seed(seed, {3}), emb0, out.k_range_clamped));

  detail::PairMask mask(universe);
  for (const Edge& e : e0) mask.set(pair_index(e.i, e.j));
  Rng rng_e1(derive_seed(seed, {1}));

  if (fit0.k_hat < 2) {
    // No block pair to concentrate on; the whole increment is uniform.
    out.fallback_uniform = true;
    detail::draw_pairs(mask, universe, universe - e0.size(), target, rng_e1,
                       [](std::uint64_t i) { return i; }, out.budget.e1);
  } else {
    const BlockEstimate est = estimate_block_model(fit0, emb0.signs());
    const ChernoffReport rep = chernoff_info(est.b, est.pi, cfg.opt);
    out.active_k = rep.active_k;
    out.active_l = rep.active_l;
    const double s_hat = est.pi(rep.active_k) + est.pi(rep.active_l);

    std::vector<std::uint32_t> active;
    for (std::uint32_t v = 0; v < truth.n; ++v)
      if (fit0.labels[v] == rep.active_k || fit0.labels[v] == rep.active_l) active.push_back(v);
    const std::uint64_t star_universe = pair_count(active.size());
    std::uint64_t star_marked = 0;
    {
      std::vector<char> is_active(truth.n, 0);
      for (std::uint32_t v : active) is_active[v] = 1;
      for (const Edge& e : e0)
        if (is_active[e.i] && is_active[e.j]) ++star_marked;
    }
    const std::uint64_t star_pool = star_universe - star_marked;
    const std::uint64_t e1_want =
        round_count(p1 * static_cast<double>(universe) * s_hat * s_hat);
    const std::uint64_t e1_count = std::min({e1_want, star_pool, target});
    detail::draw_pairs(mask, star_universe, star_pool, e1_count, rng_e1,
                       [&active](std::uint64_t local) {
                         const Edge e = pair_at(local);
                         return pair_index(active[e.i], active[e.j]);
                       },
                       out.budget.e1);
  }

  std::uint64_t e11_count = target - out.budget.e1.size();
  const std::uint64_t pool = universe - e0.size() - out.budget.e1.size();
  if (e11_count > pool) {
    e11_count = pool;
    out.shortfall = true;
  }
  Rng rng_e11(derive_seed(seed, {2}));
  detail::draw_pairs(mask, universe, pool, e11_count, rng_e11,
                     [](std::uint64_t i) { return i; }, out.budget.e11);

  const ObservedGraph observed = restrict_graph(
      truth, detail::merge_sorted(detail::merge_sorted(e0, out.budget.e1), out.budget.e11));
  Embedding emb;
  const MixtureFit fit = detail::cluster_observed(observed, cfg, derive_seed(seed, {4}), emb,
                                                  out.k_range_clamped);
  out.tau_hat = fit.labels;
  out.k_hat = fit.k_hat;
  out.d_hat = emb.d();
  return out;
}

}  // namespace dynsamp
