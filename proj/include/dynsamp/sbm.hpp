#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dynsamp/error.hpp"
#include "dynsamp/rng.hpp"

namespace dynsamp {

// Unordered vertex pair, stored with i < j. Block labels and vertex ids are
// 0-based everywhere in memory; conversion to 1-based happens at file I/O.
struct Edge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;

  friend bool operator==(const Edge& a, const Edge& b) { return a.i == b.i && a.j == b.j; }
  friend bool operator<(const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  }
};

using EdgeList = std::vector<Edge>;

inline std::uint64_t pair_count(std::size_t n) {
  return static_cast<std::uint64_t>(n) * (n - 1) / 2;
}

// Colexicographic index of the pair (i, j), i < j. Does not depend on n,
// which lets bitmask membership structures grow with the largest j seen.
inline std::uint64_t pair_index(std::uint32_t i, std::uint32_t j) {
  return static_cast<std::uint64_t>(j) * (j - 1) / 2 + i;
}

inline Edge pair_at(std::uint64_t idx) {
  // Solve j(j-1)/2 <= idx for the largest such j, then fix up rounding.
  auto j = static_cast<std::uint32_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(idx))) / 2.0);
  while (static_cast<std::uint64_t>(j) * (j - 1) / 2 > idx) --j;
  while (static_cast<std::uint64_t>(j + 1) * j / 2 <= idx) ++j;
  const std::uint64_t base = static_cast<std::uint64_t>(j) * (j - 1) / 2;
  return Edge{static_cast<std::uint32_t>(idx - base), j};
}

// Round half away from zero; used for every edge-budget size so that counts
// are exactly reproducible.
inline std::uint64_t round_count(double x) {
  return static_cast<std::uint64_t>(std::llround(x));
}

// K-block connectivity matrix plus block-assignment probabilities.
struct BlockModel {
  int k = 0;
  Eigen::MatrixXd b;   // K x K, symmetric, entries in (0,1)
  Eigen::VectorXd pi;  // length K, positive, sums to 1
};

inline BlockModel make_block_model(const Eigen::MatrixXd& b, const Eigen::VectorXd& pi) {
  const auto k = static_cast<int>(b.rows());
  if (b.cols() != k || k < 1)
    fail(errc::bad_config, "B must be a square matrix with K >= 1");
  if (pi.size() != k)
    fail(errc::bad_config, "pi length must equal the block count of B");
  for (int r = 0; r < k; ++r)
    for (int c = r + 1; c < k; ++c)
      if (b(r, c) != b(c, r))
        fail(errc::asymmetric_b, "B[" + std::to_string(r) + "," + std::to_string(c) +
                                     "] != B[" + std::to_string(c) + "," + std::to_string(r) + "]");
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c)
      if (!(b(r, c) > 0.0 && b(r, c) < 1.0))
        fail(errc::entry_out_of_range,
             "B[" + std::to_string(r) + "," + std::to_string(c) + "] = " +
                 std::to_string(b(r, c)) + " is outside (0,1)");
  double sum = 0.0;
  for (int r = 0; r < k; ++r) {
    if (!(pi(r) > 0.0 && pi(r) < 1.0) && !(k == 1 && pi(r) == 1.0))
      fail(errc::pi_not_simplex, "pi[" + std::to_string(r) + "] = " + std::to_string(pi(r)));
    sum += pi(r);
  }
  if (std::abs(sum - 1.0) > 1e-12)
    fail(errc::pi_not_simplex, "pi sums to " + std::to_string(sum));
  return BlockModel{k, b, pi};
}

// Undirected simple graph given by its edge set; labels, when present, hold
// the block assignment of each vertex.
struct ObservedGraph {
  std::size_t n = 0;
  EdgeList edges;           // sorted by (i, j), unique, i < j
  std::vector<int> labels;  // empty, or length n with values in [0, K)

  bool has_labels() const { return !labels.empty(); }
};

inline EdgeList potential_edge_set(std::size_t n) {
  if (n < 2) fail(errc::bad_config, "potential edge set needs n >= 2");
  EdgeList e;
  e.reserve(pair_count(n));
  for (std::uint32_t i = 0; i + 1 < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j) e.push_back(Edge{i, j});
  return e;
}

// Draw labels i.i.d. from pi, then each pair i<j independently with
// probability B[tau_i, tau_j]. Iteration order (i outer, j inner) is part of
// the reproducibility contract.
inline ObservedGraph sample_sbm(const BlockModel& model, std::size_t n, std::uint64_t seed) {
  if (n < static_cast<std::size_t>(model.k))
    fail(errc::bad_config, "n must be at least the block count");
  Rng rng(seed);
  std::vector<double> w(model.pi.data(), model.pi.data() + model.k);
  const std::vector<double> cum = cumulative_weights(w);
  ObservedGraph g;
  g.n = n;
  g.labels.resize(n);
  for (std::size_t v = 0; v < n; ++v) g.labels[v] = static_cast<int>(rng.categorical(cum));
  for (std::uint32_t i = 0; i + 1 < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      if (rng.bernoulli(model.b(g.labels[i], g.labels[j]))) g.edges.push_back(Edge{i, j});
    }
  }
  return g;
}

// Uniform without-replacement subset of exactly `count` pairs.
inline EdgeList sample_edge_subset(const EdgeList& pool, std::uint64_t count, std::uint64_t seed) {
  if (count > pool.size())
    fail(errc::count_exceeds_pool, "requested " + std::to_string(count) + " of " +
                                       std::to_string(pool.size()) + " pairs");
  Rng rng(seed);
  std::vector<std::uint32_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
  // Partial Fisher-Yates: after k swaps the prefix is a uniform k-subset.
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t r = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[r]);
  }
  EdgeList out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) out.push_back(pool[idx[i]]);
  std::sort(out.begin(), out.end());
  return out;
}

// Keep only edges whose pair was purchased: edge set becomes
// graph.edges intersect kept. Labels carry through.
inline ObservedGraph restrict_graph(const ObservedGraph& graph, const EdgeList& kept) {
  ObservedGraph out;
  out.n = graph.n;
  out.labels = graph.labels;
  EdgeList sorted_kept = kept;
  if (!std::is_sorted(sorted_kept.begin(), sorted_kept.end()))
    std::sort(sorted_kept.begin(), sorted_kept.end());
  out.edges.reserve(std::min(graph.edges.size(), sorted_kept.size()));
  std::set_intersection(graph.edges.begin(), graph.edges.end(), sorted_kept.begin(),
                        sorted_kept.end(), std::back_inserter(out.edges));
  return out;
}

// Bookkeeping for one sampling run. The full potential set E is implicit in
// n (|E| = n(n-1)/2); the purchased subsets are explicit and pairwise
// disjoint.
struct EdgeBudget {
  std::size_t n = 0;
  double p0 = 0.0;
  double p1 = 0.0;
  EdgeList e0;
  EdgeList e1;
  EdgeList e11;

  std::uint64_t universe_size() const { return pair_count(n); }
  std::uint64_t spent() const { return e0.size() + e1.size() + e11.size(); }
};

}  // namespace dynsamp
