#pragma once

// Fractional power encoding over holographic reduced representations.
//
// A unitary basis vector v has a Fourier spectrum of unit-magnitude bins
// e^{i theta_k}. Raising the spectrum to a real power r in [0, 1] gives the
// key rot(v, r) = F^{-1}(e^{i theta_k r}); binding is circular convolution and
// bundling is summation. Keys built from one basis have a cosine similarity
// that depends only on |r1 - r2| and decays like sinc(pi * dr).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "holofuse/fft.hpp"

namespace holofuse::vsa {

using Vector = std::vector<double>;
using Spectrum = std::vector<Complex>;

// Fraction of a full phase scaling; constructed values satisfy 0 <= r <= 1.
class AngleFraction {
 public:
  explicit AngleFraction(double r);
  [[nodiscard]] double value() const noexcept { return r_; }

 private:
  double r_;
};

class UnitaryBasis {
 public:
  // Samples phases uniformly on (-pi, pi] for bins 1..ceil(dim/2)-1 and pins
  // DC (and Nyquist for even dim) to +1. Deterministic in (dim, seed).
  static UnitaryBasis sample(std::size_t dim, std::uint64_t seed);

  [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  // Principal phase of each half-spectrum bin, theta_k in (-pi, pi].
  [[nodiscard]] std::span<const double> phases() const noexcept { return phases_; }

 private:
  UnitaryBasis(std::uint64_t seed, std::vector<double> phases, Vector values)
      : seed_(seed), phases_(std::move(phases)), values_(std::move(values)) {}

  std::uint64_t seed_;
  std::vector<double> phases_;
  Vector values_;
};

// Half spectrum of rot(v, r). No range check on r; callers that take
// user-facing angles go through AngleFraction.
[[nodiscard]] Spectrum rot_spectrum(const UnitaryBasis& v, double r);
// d/dr of rot_spectrum: i theta_k e^{i theta_k r} per bin.
[[nodiscard]] Spectrum rot_spectrum_derivative(const UnitaryBasis& v, double r);

[[nodiscard]] Vector rot(const UnitaryBasis& v, AngleFraction r);

// c_n = sum_k a_k b_{(n-k) mod d}, evaluated through the FFT.
[[nodiscard]] Vector circular_convolve(std::span<const double> a, std::span<const double> b);

// Elementwise sum of equally sized vectors.
[[nodiscard]] Vector bundle(std::span<const Vector> vectors);

[[nodiscard]] double cosine_similarity(std::span<const double> a, std::span<const double> b);

[[nodiscard]] double key_similarity(const UnitaryBasis& v, AngleFraction r1, AngleFraction r2);

[[nodiscard]] double l2_norm(std::span<const double> a);

}  // namespace holofuse::vsa
