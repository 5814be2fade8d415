#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace conformal {

// All randomness in the library flows through these helpers so that a seed
// fully determines the result on every platform. std::mt19937_64 output is
// specified by the standard; the distributions in <random> are not, so we
// avoid them.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic per-replicate substream seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 1));
}

// Unbiased draw from {0, ..., n-1}.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = gen();
    if (r >= threshold) return r % n;
  }
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_real01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Fisher-Yates permutation of {0, ..., n-1}.
inline std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& gen) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(gen, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

// Standard normal via Box-Muller on the portable uniform; used by tests and
// synthetic-data helpers, never by the prediction methods themselves.
inline double standard_normal(std::mt19937_64& gen) {
  double u1 = uniform_real01(gen);
  while (u1 <= 0.0) u1 = uniform_real01(gen);
  const double u2 = uniform_real01(gen);
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace conformal
