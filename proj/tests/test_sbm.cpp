#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "dynsamp/error.hpp"
#include "dynsamp/sbm.hpp"

namespace {

using namespace dynsamp;

Eigen::MatrixXd rank_one_b() {
  Eigen::VectorXd v(4);
  v << 0.2, 0.4, 0.5, 0.9;
  return v * v.transpose();
}

Eigen::VectorXd balanced_pi() { return Eigen::VectorXd::Constant(4, 0.25); }

TEST(block_model, accepts_rank_one_example) {
  const BlockModel m = make_block_model(rank_one_b(), balanced_pi());
  EXPECT_EQ(m.k, 4);
  EXPECT_NEAR(m.b(0, 0), 0.04, 1e-15);
  EXPECT_NEAR(m.b(0, 3), 0.18, 1e-15);
}

TEST(block_model, rejects_boundary_entry) {
  Eigen::MatrixXd b = rank_one_b();
  b(0, 1) = b(1, 0) = 0.0;
  try {
    make_block_model(b, balanced_pi());
    FAIL() << "expected entry_out_of_range";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::entry_out_of_range);
  }
}

TEST(block_model, rejects_asymmetry) {
  Eigen::MatrixXd b(2, 2);
  b << 0.5, 0.2, 0.3, 0.5;
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
  try {
    make_block_model(b, pi);
    FAIL() << "expected asymmetric_b";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::asymmetric_b);
  }
}

TEST(block_model, rejects_bad_simplex) {
  Eigen::MatrixXd b(2, 2);
  b << 0.5, 0.2, 0.2, 0.5;
  Eigen::VectorXd pi(2);
  pi << 0.6, 0.6;
  try {
    make_block_model(b, pi);
    FAIL() << "expected pi_not_simplex";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::pi_not_simplex);
  }
}

TEST(pairs, small_enumerations) {
  const EdgeList e3 = potential_edge_set(3);
  ASSERT_EQ(e3.size(), 3u);
  EXPECT_EQ(e3[0], (Edge{0, 1}));
  EXPECT_EQ(e3[1], (Edge{0, 2}));
  EXPECT_EQ(e3[2], (Edge{1, 2}));

  const EdgeList e2 = potential_edge_set(2);
  ASSERT_EQ(e2.size(), 1u);
  EXPECT_EQ(e2[0], (Edge{0, 1}));

  EXPECT_EQ(potential_edge_set(100).size(), 4950u);
  EXPECT_EQ(pair_count(100), 4950u);
}

TEST(pairs, index_roundtrip) {
  for (std::uint64_t idx = 0; idx < 10000; ++idx) {
    const Edge e = pair_at(idx);
    EXPECT_LT(e.i, e.j);
    EXPECT_EQ(pair_index(e.i, e.j), idx);
  }
  // Large indices must survive the float initial guess.
  for (std::uint64_t idx : {4999950000ull, 4999949999ull, 123456789012ull}) {
    const Edge e = pair_at(idx);
    EXPECT_EQ(pair_index(e.i, e.j), idx);
  }
}

TEST(round_count, half_away_from_zero) {
  EXPECT_EQ(round_count(0.5), 1u);
  EXPECT_EQ(round_count(1.4999), 1u);
  EXPECT_EQ(round_count(2.5), 3u);
  EXPECT_EQ(round_count(0.0), 0u);
}

TEST(sample_sbm, deterministic_per_seed) {
  const BlockModel m = make_block_model(rank_one_b(), balanced_pi());
  const ObservedGraph a = sample_sbm(m, 300, 42);
  const ObservedGraph b = sample_sbm(m, 300, 42);
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_EQ(a.labels, b.labels);
  const ObservedGraph c = sample_sbm(m, 300, 43);
  EXPECT_NE(a.edges, c.edges);
}

TEST(sample_sbm, edges_sorted_unique_no_loops) {
  const BlockModel m = make_block_model(rank_one_b(), balanced_pi());
  const ObservedGraph g = sample_sbm(m, 500, 1);
  EXPECT_TRUE(std::is_sorted(g.edges.begin(), g.edges.end()));
  EXPECT_EQ(std::adjacent_find(g.edges.begin(), g.edges.end()), g.edges.end());
  for (const Edge& e : g.edges) {
    EXPECT_LT(e.i, e.j);
    EXPECT_LT(e.j, g.n);
  }
}

TEST(sample_sbm, block_pair_densities_match_connectivity) {
  const BlockModel m = make_block_model(rank_one_b(), balanced_pi());
  const ObservedGraph g = sample_sbm(m, 4000, 7);
  std::map<std::pair<int, int>, double> edges_kl;
  std::vector<std::uint64_t> block_size(4, 0);
  for (int l : g.labels) ++block_size[l];
  for (const Edge& e : g.edges) {
    int a = g.labels[e.i], b = g.labels[e.j];
    if (a > b) std::swap(a, b);
    edges_kl[{a, b}] += 1.0;
  }
  for (int k = 0; k < 4; ++k) {
    for (int l = k; l < 4; ++l) {
      const double pairs = k == l
                               ? static_cast<double>(block_size[k]) * (block_size[k] - 1) / 2.0
                               : static_cast<double>(block_size[k]) * block_size[l];
      const double density = edges_kl[{k, l}] / pairs;
      const double se = std::sqrt(m.b(k, l) * (1.0 - m.b(k, l)) / pairs);
      EXPECT_LT(std::abs(density - m.b(k, l)), 3.0 * se)
          << "block pair (" << k << "," << l << ")";
    }
  }
}

TEST(sample_sbm, constant_connectivity_total_count) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(3, 3, 0.2);
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  const BlockModel m = make_block_model(b, pi);
  const ObservedGraph g = sample_sbm(m, 1000, 9);
  const double trials = static_cast<double>(pair_count(1000));
  const double sigma = std::sqrt(trials * 0.2 * 0.8);
  EXPECT_LT(std::abs(static_cast<double>(g.edges.size()) - trials * 0.2), 4.0 * sigma);
}

TEST(sample_edge_subset, exhaustive_and_empty_draws) {
  const EdgeList pool = potential_edge_set(5);
  EdgeList all = sample_edge_subset(pool, 10, 3);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, pool);
  EXPECT_TRUE(sample_edge_subset(pool, 0, 3).empty());
}

TEST(sample_edge_subset, rejects_overdraw) {
  const EdgeList pool = potential_edge_set(4);
  try {
    sample_edge_subset(pool, 7, 1);
    FAIL() << "expected count_exceeds_pool";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::count_exceeds_pool);
  }
}

TEST(sample_edge_subset, single_draw_uniform) {
  const EdgeList pool = potential_edge_set(5);  // 10 pairs used as a 5-slot prefix pool
  std::vector<int> counts(5, 0);
  for (int trial = 0; trial < 10000; ++trial) {
    const EdgeList draw = sample_edge_subset(EdgeList(pool.begin(), pool.begin() + 5), 1, 100 + trial);
    ASSERT_EQ(draw.size(), 1u);
    const auto it = std::find(pool.begin(), pool.end(), draw[0]);
    ++counts[static_cast<int>(it - pool.begin())];
  }
  const double sigma = std::sqrt(10000 * 0.2 * 0.8);
  for (int c : counts) EXPECT_LT(std::abs(c - 2000.0), 4.0 * sigma);
}

TEST(sample_edge_subset, sorted_unique_subset_of_pool) {
  const EdgeList pool = potential_edge_set(60);
  const EdgeList sub = sample_edge_subset(pool, 700, 5);
  ASSERT_EQ(sub.size(), 700u);
  EXPECT_TRUE(std::is_sorted(sub.begin(), sub.end()));
  EXPECT_EQ(std::adjacent_find(sub.begin(), sub.end()), sub.end());
  EXPECT_TRUE(std::includes(pool.begin(), pool.end(), sub.begin(), sub.end()));
}

TEST(restrict_graph, keeps_intersection) {
  ObservedGraph g;
  g.n = 3;
  g.edges = {Edge{0, 1}, Edge{1, 2}};
  const ObservedGraph full = restrict_graph(g, potential_edge_set(3));
  EXPECT_EQ(full.edges, g.edges);

  const ObservedGraph none = restrict_graph(g, {});
  EXPECT_EQ(none.n, 3u);
  EXPECT_TRUE(none.edges.empty());

  const ObservedGraph mixed = restrict_graph(g, {Edge{1, 2}, Edge{0, 2}});
  ASSERT_EQ(mixed.edges.size(), 1u);
  EXPECT_EQ(mixed.edges[0], (Edge{1, 2}));
}

}  // namespace
