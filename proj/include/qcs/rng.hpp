#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qcs {

using Rng = std::mt19937_64;

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Purpose tags for independent random streams within one trial.
enum class Stream : std::uint64_t {
  Signal = 1,
  Matrix = 2,
  Dither = 3,
  Noise = 4,
  Corruption = 5,
  Diagnostics = 6,
};

/// Derives a child seed from a parent seed and a path of integers. The map is
/// a pure function, so any (master, trial, ...) tuple always names the same
/// stream regardless of the order in which streams are requested.
inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = detail::splitmix64(parent ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t p : path) h = detail::splitmix64(h ^ detail::splitmix64(p));
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t parent, Stream s, std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = derive_seed(parent, {static_cast<std::uint64_t>(s)});
  return path.size() == 0 ? h : derive_seed(h, path);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace qcs
