#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "dynsamp/error.hpp"

namespace dynsamp {

// Finalizer from the splitmix64 generator. Used as the hash step of the
// seed-splitting rule, never as the sampling engine itself.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stream-splitting rule: every independent random stream gets
//   derive_seed(master, {tag, index0, index1, ...})
// where the tag identifies the purpose of the stream. Hash-chaining via
// splitmix64 keeps streams decorrelated for any master seed.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t p : parts) s = splitmix64(s ^ p);
  return s;
}

// Seedable 64-bit generator (MT19937-64, fully specified by the standard)
// with hand-rolled distributions so that sampled values depend only on the
// engine's bit stream, not on any library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, bound) via Lemire's multiply-shift
  // rejection. bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    using u128 = unsigned __int128;
    std::uint64_t x = engine_();
    u128 m = static_cast<u128>(x) * static_cast<u128>(bound);
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      std::uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        x = engine_();
        m = static_cast<u128>(x) * static_cast<u128>(bound);
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return next_unit() < p; }

  // Index k with probability weights[k] / sum(weights).
  std::size_t categorical(const std::vector<double>& cumulative) {
    const double u = next_unit() * cumulative.back();
    std::size_t lo = 0, hi = cumulative.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cumulative[mid] > u) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

 private:
  std::mt19937_64 engine_;
};

inline std::vector<double> cumulative_weights(const std::vector<double>& w) {
  std::vector<double> c(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    c[i] = acc;
  }
  return c;
}

}  // namespace dynsamp
