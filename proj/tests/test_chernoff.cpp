#include <gtest/gtest.h>

#include <cmath>
#include <utility>
#include <vector>

#include "dynsamp/chernoff.hpp"
#include "dynsamp/error.hpp"
#include "dynsamp/rng.hpp"
#include "dynsamp/sbm.hpp"
#include "dynsamp/spectral.hpp"

namespace {

using namespace dynsamp;

Eigen::MatrixXd rank_one_b() {
  Eigen::VectorXd v(4);
  v << 0.2, 0.4, 0.5, 0.9;
  return v * v.transpose();
}

Eigen::VectorXd balanced_pi() { return Eigen::VectorXd::Constant(4, 0.25); }

Eigen::VectorXd unbalanced_pi() {
  Eigen::VectorXd pi(4);
  pi << 0.125, 0.125, 0.375, 0.375;
  return pi;
}

// Values frozen from a brute-force 1e5-point grid scan over t, computed
// independently before the golden-section optimizer existed.
struct Golden {
  double delta;
  double sigma[4];
  double c[6];  // pairs (0,1),(0,2),(0,3),(1,2),(1,3),(2,3)
  double t[6];
  double rho;
};

const Golden kBalanced = {
    0.31500000000000006,
    {0.39145376669186183, 0.6325825144872762, 0.69677500629881572, 0.57773242630385468},
    {0.019809054781422218, 0.04219907470263428, 0.25516813746803624, 0.0037634105436781945,
     0.1033319865567614, 0.062906849290454328},
    {0.559710, 0.571580, 0.548500, 0.512080, 0.488660, 0.476600},
    0.0037634105436781945};

const Golden kUnbalanced = {
    0.42250000000000004,
    {0.30774832813977104, 0.49320401946710546, 0.54007212632610901, 0.42181296173103172},
    {0.025314238856743412, 0.054112925751699271, 0.33789594295301567, 0.0048414689900650341,
     0.13681801968887997, 0.083486705528332358},
    {0.558680, 0.569840, 0.539330, 0.511350, 0.480460, 0.469150},
    0.0048414689900650341};

struct RandomSbm {
  Eigen::MatrixXd b;
  Eigen::VectorXd pi;
};

RandomSbm random_sbm(Rng& rng) {
  const int k = 2 + static_cast<int>(rng.below(5));
  Eigen::MatrixXd m(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) m(r, c) = 0.05 + 0.9 * rng.next_unit();
  Eigen::MatrixXd b = 0.5 * (m + m.transpose());
  Eigen::VectorXd pi(k);
  for (int r = 0; r < k; ++r) pi(r) = 0.05 - std::log(std::max(rng.next_unit(), 1e-12));
  pi /= pi.sum();
  return {b, pi};
}

void expect_golden(const Eigen::VectorXd& pi, const Golden& g) {
  const LatentConfig latent = latent_from_block_model(make_block_model(rank_one_b(), pi));
  const Eigen::MatrixXd delta = delta_matrix(latent, pi);
  ASSERT_EQ(delta.rows(), 1);
  EXPECT_NEAR(delta(0, 0), g.delta, 1e-12);
  for (int k = 0; k < 4; ++k) {
    const Eigen::MatrixXd sig = sigma_block(latent, pi, k);
    ASSERT_EQ(sig.rows(), 1);
    EXPECT_NEAR(sig(0, 0), g.sigma[k], 1e-9 * g.sigma[k]) << "sigma block " << k;
  }

  const ChernoffReport rep = chernoff_info(rank_one_b(), pi);
  const std::pair<int, int> pairs[6] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (int i = 0; i < 6; ++i) {
    const auto [k, l] = pairs[i];
    EXPECT_NEAR(rep.c(k, l), g.c[i], 1e-7 * g.c[i]) << "pair " << k << "," << l;
    EXPECT_NEAR(rep.t_star(k, l), g.t[i], 1e-4) << "pair " << k << "," << l;
    EXPECT_DOUBLE_EQ(rep.t_star(l, k), 1.0 - rep.t_star(k, l));
  }
  EXPECT_NEAR(rep.rho, g.rho, 1e-7 * g.rho);
  EXPECT_EQ(rep.active_k, 1);
  EXPECT_EQ(rep.active_l, 2);
  EXPECT_FALSE(rep.tie);
}

TEST(goldens, balanced_assignment) { expect_golden(balanced_pi(), kBalanced); }

TEST(goldens, unbalanced_assignment) { expect_golden(unbalanced_pi(), kUnbalanced); }

TEST(delta, single_point_mass) {
  LatentConfig latent;
  latent.nu = Eigen::MatrixXd::Ones(1, 1);
  latent.eigenvalues = Eigen::VectorXd::Ones(1);
  latent.d_plus = 1;
  const Eigen::MatrixXd delta = delta_matrix(latent, Eigen::VectorXd::Ones(1));
  EXPECT_DOUBLE_EQ(delta(0, 0), 1.0);
}

TEST(delta, thinning_scales_linearly) {
  const Eigen::VectorXd pi = balanced_pi();
  const double p = 0.3;
  const Eigen::MatrixXd d_full =
      delta_matrix(latent_from_block_model(make_block_model(rank_one_b(), pi)), pi);
  const Eigen::MatrixXd d_thin =
      delta_matrix(latent_from_block_model(make_block_model(p * rank_one_b(), pi)), pi);
  EXPECT_LT((d_thin - p * d_full).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(sigma, constant_connectivity_blocks_share_covariance) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(2, 2, 0.3);
  Eigen::VectorXd pi(2);
  pi << 0.6, 0.4;
  const LatentConfig latent = latent_from_block_model(make_block_model(b, pi));
  const Eigen::MatrixXd s0 = sigma_block(latent, pi, 0);
  const Eigen::MatrixXd s1 = sigma_block(latent, pi, 1);
  EXPECT_LT((s0 - s1).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(sigma, thinned_covariance_splits_into_scaled_plus_low_rank) {
  Rng rng(606);
  for (int rep = 0; rep < 25; ++rep) {
    const RandomSbm s = rep == 0 ? RandomSbm{rank_one_b(), balanced_pi()} : random_sbm(rng);
    const double p = 0.05 + 0.9 * rng.next_unit();
    const BlockModel full = make_block_model(s.b, s.pi);
    const BlockModel thin = make_block_model(p * s.b, s.pi);
    const LatentConfig latent = latent_from_block_model(full);
    const LatentConfig latent_thin = latent_from_block_model(thin);
    const int kb = static_cast<int>(s.pi.size());

    const Eigen::MatrixXd delta_inv = delta_matrix(latent, s.pi).inverse();
    const Eigen::MatrixXd v =
        latent.nu * delta_inv * latent.ipq().asDiagonal();  // K x d update directions
    for (int k = 0; k < kb; ++k) {
      Eigen::VectorXd d_diag(kb);
      for (int l = 0; l < kb; ++l) d_diag(l) = (1.0 - p) * s.pi(l) * s.b(k, l);
      const Eigen::MatrixXd expect = p * sigma_block(latent, s.pi, k) +
                                     v.transpose() * d_diag.asDiagonal() * v;
      const Eigen::MatrixXd got = sigma_block(latent_thin, s.pi, k);
      EXPECT_LT((got - expect).cwiseAbs().maxCoeff(), 1e-9)
          << "rep " << rep << " block " << k;
    }
  }
}

TEST(woodbury, inverse_decomposition_matches_direct) {
  Rng rng(707);
  for (int rep = 0; rep < 30; ++rep) {
    const RandomSbm s = rep == 0 ? RandomSbm{rank_one_b(), balanced_pi()} : random_sbm(rng);
    const int kb = static_cast<int>(s.pi.size());
    const double p = 0.05 + 0.9 * rng.next_unit();
    const double t = 0.05 + 0.9 * rng.next_unit();
    const int k = static_cast<int>(rng.below(kb));
    int l = static_cast<int>(rng.below(kb - 1));
    if (l >= k) ++l;
    const ScaledInverseParts parts = scaled_inverse_decomposition(s.b, s.pi, p, t, k, l);
    const double scale = parts.direct_inverse.cwiseAbs().maxCoeff();
    EXPECT_LT((parts.direct_inverse - parts.woodbury_inverse).cwiseAbs().maxCoeff(),
              1e-8 * scale)
        << "rep " << rep;
    EXPECT_GT(parts.h, 0.0);
  }
}

TEST(chernoff_pair, identical_blocks_give_zero) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(2, 2, 0.4);
  const PairStat st = chernoff_pair(b, Eigen::VectorXd::Constant(2, 0.5), 0, 1);
  EXPECT_NEAR(st.value, 0.0, 1e-15);
}

TEST(chernoff_pair, exchangeable_blocks_hit_symmetric_closed_form) {
  Eigen::MatrixXd b(2, 2);
  b << 0.6, 0.2, 0.2, 0.6;
  const Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
  // Swapping the two blocks maps the model onto itself, so the objective is
  // symmetric in t: the optimum sits at t = 1/2 with value q/4 evaluated at
  // the averaged covariance.
  const LatentConfig latent = latent_from_block_model(make_block_model(b, pi));
  const Eigen::MatrixXd sigma =
      0.5 * (sigma_block(latent, pi, 0) + sigma_block(latent, pi, 1));
  const Eigen::VectorXd diff = latent.nu.row(0) - latent.nu.row(1);
  const double q = diff.dot(sigma.inverse() * diff);

  const PairStat st = chernoff_pair(b, pi, 0, 1);
  EXPECT_NEAR(st.value, q / 4.0, 1e-9 * q);
  EXPECT_NEAR(st.t_star, 0.5, 1e-6);
}

TEST(chernoff_pair, rejects_bad_pairs) {
  EXPECT_THROW(chernoff_pair(rank_one_b(), balanced_pi(), 2, 2), Error);
  EXPECT_THROW(chernoff_pair(rank_one_b(), balanced_pi(), 0, 4), Error);
}

TEST(rho, two_blocks_reduce_to_single_pair) {
  Eigen::MatrixXd b(2, 2);
  b << 0.7, 0.2, 0.2, 0.5;
  const Eigen::VectorXd pi = Eigen::VectorXd::Constant(2, 0.5);
  const ChernoffReport rep = chernoff_info(b, pi);
  const PairStat st = chernoff_pair(b, pi, 0, 1);
  EXPECT_DOUBLE_EQ(rep.rho, st.value);
  EXPECT_EQ(rep.active_k, 0);
  EXPECT_EQ(rep.active_l, 1);
}

TEST(rho, uniform_thinning_strictly_hurts) {
  const ChernoffReport full = chernoff_info(rank_one_b(), balanced_pi());
  const ChernoffReport half = chernoff_info(0.5 * rank_one_b(), balanced_pi());
  EXPECT_GT(full.rho, half.rho);
  const ChernoffReport same = chernoff_info(1.0 * rank_one_b(), balanced_pi());
  EXPECT_DOUBLE_EQ(full.rho, same.rho);
}

TEST(rho, thinned_curve_increases_with_rate) {
  double prev = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double p = i / 10.0;
    const double rho = chernoff_info(p * rank_one_b(), balanced_pi()).rho;
    EXPECT_GT(rho, prev) << "p = " << p;
    prev = rho;
  }
  EXPECT_DOUBLE_EQ(prev, chernoff_info(rank_one_b(), balanced_pi()).rho);
}

TEST(superiority, ordering_examples) {
  const Eigen::MatrixXd b = rank_one_b();
  const Eigen::VectorXd pi = balanced_pi();
  for (int i = 1; i <= 9; ++i)
    EXPECT_TRUE(is_superior(b, (i / 10.0) * b, pi)) << "p = " << i / 10.0;
  EXPECT_FALSE(is_superior(b, b, pi));
  const double p0 = 0.01, p1 = 0.1;
  EXPECT_TRUE(is_superior((p0 + p1) * b, p0 * b, pi));
}

TEST(superiority, random_models_never_improve_under_thinning) {
  Rng rng(909);
  for (int rep = 0; rep < 20; ++rep) {
    const RandomSbm s = random_sbm(rng);
    const double p = 0.05 + 0.9 * rng.next_unit();
    const double rho_full = chernoff_info(s.b, s.pi).rho;
    const double rho_thin = chernoff_info(p * s.b, s.pi).rho;
    EXPECT_GT(rho_full, rho_thin) << "rep " << rep;
  }
}

TEST(scheme, initial_matrix_and_caps) {
  const Eigen::MatrixXd b = rank_one_b();
  const double p0 = 0.01;

  const SchemeInfo bal = find_p1_star(b, balanced_pi(), p0);
  EXPECT_NEAR(bal.b0(0, 0), 0.0004, 1e-15);
  EXPECT_EQ(bal.k_star, 1);
  EXPECT_EQ(bal.l_star, 2);
  EXPECT_DOUBLE_EQ(bal.s, 0.5);
  EXPECT_NEAR(bal.p1_max, 0.99 * 0.25, 1e-12);

  const SchemeInfo unbal = find_p1_star(b, unbalanced_pi(), p0);
  EXPECT_EQ(unbal.k_star, 1);
  EXPECT_EQ(unbal.l_star, 2);
  EXPECT_DOUBLE_EQ(unbal.s, 0.5);
  EXPECT_NEAR(unbal.p1_max, 0.99 * 0.25, 1e-12);

  EXPECT_NEAR(bal.p11_max(p0), 1.0 - p0 - bal.p1_star / 0.25 + bal.p1_star, 1e-12);
  EXPECT_GE(bal.p1_star, 0.0);
  EXPECT_LE(bal.p1_star, bal.p1_max + 1e-15);
}

TEST(scheme, concentrated_matrix_only_touches_active_cells) {
  const Eigen::MatrixXd b = rank_one_b();
  const Eigen::VectorXd pi = balanced_pi();
  const double p0 = 0.01;
  const SchemeInfo info = find_p1_star(b, pi, p0);
  const double p1 = 0.5 * info.p1_star;
  const SchemeMatrices mats = scheme_matrices(b, pi, p0, p1);

  EXPECT_LT((mats.b1 - (p0 + p1) * b).cwiseAbs().maxCoeff(), 1e-15);
  const double boost = p1 / (info.s * info.s);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const bool active = (r == info.k_star || r == info.l_star) &&
                          (c == info.k_star || c == info.l_star);
      const double expect = active ? mats.b0(r, c) + boost * b(r, c) : mats.b0(r, c);
      EXPECT_NEAR(mats.b1_opt(r, c), expect, 1e-15) << "cell " << r << "," << c;
    }
  }
}

TEST(scheme, overflow_spreads_uniformly_past_threshold) {
  const Eigen::MatrixXd b = rank_one_b();
  const Eigen::VectorXd pi = balanced_pi();
  const double p0 = 0.01;
  const SchemeInfo info = find_p1_star(b, pi, p0);
  if (info.p1_star >= info.p11_max(p0)) GTEST_SKIP() << "no overflow region for this model";
  const double p1 = 0.5 * (info.p1_star + info.p11_max(p0));
  const SchemeMatrices mats = scheme_matrices(b, pi, p0, p1);

  const double boost = info.p1_star / (info.s * info.s);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const bool active = (r == info.k_star || r == info.l_star) &&
                          (c == info.k_star || c == info.l_star);
      const double base = mats.b0(r, c) + (p1 - info.p1_star) * b(r, c);
      const double expect = active ? base + boost * b(r, c) : base;
      EXPECT_NEAR(mats.b1_opt(r, c), expect, 1e-12) << "cell " << r << "," << c;
    }
  }
}

TEST(scheme, budget_overflow_rejected) {
  const Eigen::MatrixXd b = rank_one_b();
  const Eigen::VectorXd pi = balanced_pi();
  const double p0 = 0.01;
  const SchemeInfo info = find_p1_star(b, pi, p0);
  try {
    scheme_matrices(b, pi, p0, info.p11_max(p0) + 0.01);
    FAIL() << "expected over_sampling";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::over_sampling);
  }
  EXPECT_THROW(scheme_matrices(b, pi, p0, 0.0), Error);
}

TEST(scheme, active_pair_constant_until_threshold) {
  const Eigen::MatrixXd b = rank_one_b();
  for (const Eigen::VectorXd& pi : {balanced_pi(), unbalanced_pi()}) {
    const double p0 = 0.01;
    const SchemeInfo info = find_p1_star(b, pi, p0);
    // Re-scan at ten times the search resolution on each side of p1_star.
    for (int i = 1; i <= 10; ++i) {
      const double p1 = info.p1_star * i / 10.5;
      if (p1 <= 0.0) continue;
      const SchemeMatrices mats = scheme_matrices(b, pi, p0, p1);
      const ChernoffReport rep = chernoff_info(mats.b1_opt, pi);
      EXPECT_EQ(rep.active_k, info.k_star) << "p1 = " << p1;
      EXPECT_EQ(rep.active_l, info.l_star) << "p1 = " << p1;
    }
    if (info.pair_changed) {
      // Concentrating past the threshold (ignoring the overflow cap) moves
      // the argmin to the recorded successor pair.
      const double past = std::min(info.p1_star + 1e-4, info.p1_max);
      const double boost = past / (info.s * info.s);
      Eigen::MatrixXd over = p0 * b;
      for (int r : {info.k_star, info.l_star})
        for (int c : {info.k_star, info.l_star}) over(r, c) += boost * b(r, c);
      const ChernoffReport rep = chernoff_info(over, pi);
      EXPECT_TRUE(rep.active_k != info.k_star || rep.active_l != info.l_star);
      EXPECT_EQ(rep.active_k, info.after_k);
      EXPECT_EQ(rep.active_l, info.after_l);
    } else {
      EXPECT_DOUBLE_EQ(info.p1_star, info.p1_max);
    }
  }
}

TEST(scheme, two_blocks_never_change_active_pair) {
  Eigen::MatrixXd b(2, 2);
  b << 0.6, 0.2, 0.2, 0.5;
  const SchemeInfo info = find_p1_star(b, Eigen::VectorXd::Constant(2, 0.5), 0.05);
  EXPECT_FALSE(info.pair_changed);
  EXPECT_DOUBLE_EQ(info.p1_star, info.p1_max);
}

TEST(scheme_curve, ordering_holds_on_grid_for_both_assignments) {
  for (const Eigen::VectorXd& pi : {balanced_pi(), unbalanced_pi()}) {
    const SchemeCurve curve = scheme_curve(rank_one_b(), pi, 0.01, 25);
    ASSERT_EQ(curve.p1_grid.size(), 25);
    for (int i = 0; i < 25; ++i) {
      EXPECT_GT(curve.rho_b, curve.rho_optimal(i)) << "i=" << i;
      EXPECT_GT(curve.rho_optimal(i), curve.rho_baseline(i) + 1e-10) << "i=" << i;
      EXPECT_GT(curve.rho_baseline(i), curve.rho_b0) << "i=" << i;
    }
    // Baseline rho grows monotonically with the uniform budget.
    for (int i = 1; i < 25; ++i)
      EXPECT_GT(curve.rho_baseline(i), curve.rho_baseline(i - 1)) << "i=" << i;
    EXPECT_LE(curve.p1_grid(24), curve.p11_max + 1e-12);
  }
}

TEST(scheme_curve, tiny_budget_boundary_behavior) {
  const Eigen::MatrixXd b = rank_one_b();
  const Eigen::VectorXd pi = balanced_pi();
  const double p0 = 0.01;
  const double rho_b0 = chernoff_info(p0 * b, pi).rho;
  const double rho_b = chernoff_info(b, pi).rho;
  const SchemeMatrices mats = scheme_matrices(b, pi, p0, 1e-6);
  // The uniform increment perturbs a rank-one matrix smoothly.
  EXPECT_NEAR(chernoff_info(mats.b1, pi).rho, rho_b0, 1e-6);
  // The concentrated increment adds a second latent dimension, which keeps a
  // finite information edge even as the budget vanishes: ordering still holds
  // but there is no continuity with the unconcentrated value.
  const double rho_opt = chernoff_info(mats.b1_opt, pi).rho;
  EXPECT_GT(rho_opt, chernoff_info(mats.b1, pi).rho);
  EXPECT_LT(rho_opt, rho_b);
}

}  // namespace
