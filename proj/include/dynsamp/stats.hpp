#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dynsamp/error.hpp"

namespace dynsamp {

// 1-based ranks with ties replaced by the average rank of the tied run.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

struct WilcoxonResult {
  double statistic = 0.0;  // sum of ranks of the positive differences
  double p_value = 1.0;
  int n_used = 0;  // differences left after dropping zeros
  bool exact = false;
};

// One-sided signed-rank test of "the median difference is positive". Zeros
// are dropped; tied magnitudes get average ranks. Small samples use the exact
// conditional distribution over sign patterns; larger ones a normal
// approximation with continuity and tie corrections.
inline WilcoxonResult wilcoxon_one_sided(const std::vector<double>& deltas) {
  if (deltas.size() < 5)
    fail(errc::too_few_samples, "signed-rank test needs at least 5 differences");
  std::vector<double> mags;
  std::vector<bool> positive;
  for (double d : deltas) {
    if (d == 0.0) continue;
    mags.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  if (mags.empty()) fail(errc::all_zero_deltas, "all differences are zero");

  const int n = static_cast<int>(mags.size());
  const std::vector<double> ranks = average_ranks(mags);
  double w_plus = 0.0;
  for (int i = 0; i < n; ++i)
    if (positive[i]) w_plus += ranks[i];

  WilcoxonResult res;
  res.statistic = w_plus;
  res.n_used = n;

  if (n <= 25) {
    // Doubled ranks are integers even with .5 averages; count sign patterns
    // by their doubled rank sum.
    std::vector<std::int64_t> r2(n);
    std::int64_t total = 0;
    for (int i = 0; i < n; ++i) {
      r2[i] = static_cast<std::int64_t>(std::llround(2.0 * ranks[i]));
      total += r2[i];
    }
    std::vector<double> count(total + 1, 0.0);
    count[0] = 1.0;
    std::int64_t reach = 0;
    for (int i = 0; i < n; ++i) {
      reach += r2[i];
      for (std::int64_t s = reach; s >= r2[i]; --s) count[s] += count[s - r2[i]];
    }
    const auto w2 = static_cast<std::int64_t>(std::llround(2.0 * w_plus));
    double tail = 0.0;
    for (std::int64_t s = w2; s <= total; ++s) tail += count[s];
    res.p_value = tail / std::ldexp(1.0, n);
    res.exact = true;
  } else {
    const double nn = n;
    const double mean = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (w_plus - mean - 0.5) / std::sqrt(var);
    res.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
    res.exact = false;
  }
  return res;
}

// Spearman rank correlation with average ranks. NaN when either input is
// constant (no ordering information).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) fail(errc::length_mismatch, "inputs differ in length");
  if (x.size() < 2) fail(errc::too_few_samples, "rank correlation needs at least 2 points");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dynsamp
