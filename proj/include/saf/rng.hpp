#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace saf {

// mt19937_64 is bit-identical across standard libraries; the distributions are
// not, so every draw goes through the helpers below instead of <random>
// distribution objects. Seeded runs therefore reproduce on any platform.
using Rng = std::mt19937_64;

// Uniform in [0, 1), 53 usable bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform integer in [0, n). Modulo bias is irrelevant for n << 2^64.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return rng() % n;
}

// Standard normal via Box-Muller.
inline double gaussian(Rng& rng) {
  double u1;
  do {
    u1 = uniform_unit(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Fisher-Yates.
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Decorrelated child stream from a master seed (splitmix64 finalizer).
inline Rng seeded(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return Rng(z ^ (z >> 31));
}

}  // namespace saf
