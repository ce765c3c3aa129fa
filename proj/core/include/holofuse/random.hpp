#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace holofuse {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to decorrelate derived seeds.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed for the named stream `name` under `root`. Streams with different names
// are independent, so adding a consumer never shifts another one's sequence.
[[nodiscard]] constexpr std::uint64_t stream_seed(std::uint64_t root, std::string_view name) noexcept {
  return mix64(root ^ mix64(fnv1a(name)));
}

[[nodiscard]] inline Rng make_stream(std::uint64_t root, std::string_view name) {
  return Rng(stream_seed(root, name));
}

// Uniform double in [0, 1) from the top 53 bits; avoids relying on the
// library's distribution implementation for values that feed file formats.
[[nodiscard]] inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

[[nodiscard]] inline double gaussian(Rng& rng) {
  // Box-Muller; one value per call keeps the stream stateless.
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Uniform integer in [0, n).
[[nodiscard]] inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

}  // namespace holofuse
