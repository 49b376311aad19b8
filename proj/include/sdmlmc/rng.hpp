#pragma once

#include <cstdint>

// Counter-based uniform stream and inverse-CDF normal variates.
// Everything here is pure integer/double arithmetic, so streams are
// bit-identical across platforms and across runs with the same seed.

namespace sdmlmc::rng {

// splitmix64 finalizer (Stafford mix13).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Keyed counter stream: k-th 64-bit word of the stream identified by `seed`.
constexpr std::uint64_t stream_word(std::uint64_t seed, std::uint64_t counter) {
  return mix64(mix64(seed) ^ mix64(counter * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
}

// Uniform in the open interval (0,1): (k + 0.5) / 2^53 with k from 53 bits.
inline double uniform01(std::uint64_t seed, std::uint64_t counter) {
  const std::uint64_t k = stream_word(seed, counter) >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

// Derive a sub-seed for (term, index) pairs; injective on the used ranges
// because both words enter through independent mixes.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t term, std::uint64_t index) {
  std::uint64_t s = mix64(base);
  s = mix64(s ^ (term * 0x9e3779b97f4a7c15ull + 1));
  s = mix64(s ^ (index * 0xc2b2ae3d27d4eb4full + 2));
  return s;
}

// Inverse of the standard normal CDF (Wichura's AS 241, double precision).
double inverse_normal_cdf(double p);

// k-th standard normal of the stream identified by `seed`.
inline double standard_normal(std::uint64_t seed, std::uint64_t counter) {
  return inverse_normal_cdf(uniform01(seed, counter));
}

}  // namespace sdmlmc::rng
