#include "holofuse/vsa.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "holofuse/errors.hpp"
#include "holofuse/random.hpp"

namespace holofuse::vsa {

AngleFraction::AngleFraction(double r) : r_(r) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw DomainError("angle fraction must lie in [0, 1], got " + std::to_string(r));
  }
}

UnitaryBasis UnitaryBasis::sample(std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw DomainError("unitary basis: dimension must be >= 2, got " + std::to_string(dim));
  const std::size_t bins = dim / 2 + 1;
  const std::size_t free_bins = (dim + 1) / 2 - 1;  // ceil(dim/2) - 1
  std::vector<double> phases(bins, 0.0);
  Rng rng(mix64(seed));
  for (std::size_t k = 1; k <= free_bins; ++k) {
    // 1 - u lies in (0, 1], so the phase lies in (-pi, pi].
    phases[k] = std::numbers::pi - 2.0 * std::numbers::pi * uniform01(rng);
  }
  UnitaryBasis basis(seed, std::move(phases), {});
  Vector values(dim);
  const auto spectrum = rot_spectrum(basis, 1.0);
  real_fft(dim)->inverse(spectrum, values);
  basis.values_ = std::move(values);
  return basis;
}

Spectrum rot_spectrum(const UnitaryBasis& v, double r) {
  const auto phases = v.phases();
  Spectrum out(phases.size());
  for (std::size_t k = 0; k < phases.size(); ++k) out[k] = std::polar(1.0, phases[k] * r);
  return out;
}

Spectrum rot_spectrum_derivative(const UnitaryBasis& v, double r) {
  const auto phases = v.phases();
  Spectrum out(phases.size());
  for (std::size_t k = 0; k < phases.size(); ++k) {
    out[k] = Complex(0.0, phases[k]) * std::polar(1.0, phases[k] * r);
  }
  return out;
}

Vector rot(const UnitaryBasis& v, AngleFraction r) {
  Vector out(v.dim());
  real_fft(v.dim())->inverse(rot_spectrum(v, r.value()), out);
  return out;
}

Vector circular_convolve(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("circular_convolve: length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.empty()) throw ShapeError("circular_convolve: empty input");
  const auto fft = real_fft(a.size());
  Spectrum fa(fft->bins());
  Spectrum fb(fft->bins());
  fft->forward(a, fa);
  fft->forward(b, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  Vector out(a.size());
  fft->inverse(fa, out);
  return out;
}

Vector bundle(std::span<const Vector> vectors) {
  if (vectors.empty()) throw ShapeError("bundle: no vectors");
  Vector out(vectors.front().size(), 0.0);
  for (const auto& v : vectors) {
    if (v.size() != out.size()) throw ShapeError("bundle: length mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i];
  }
  return out;
}

double l2_norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double denom = l2_norm(a) * l2_norm(b);
  return denom > 0.0 ? dot / denom : 0.0;
}

double key_similarity(const UnitaryBasis& v, AngleFraction r1, AngleFraction r2) {
  return cosine_similarity(rot(v, r1), rot(v, r2));
}

}  // namespace holofuse::vsa
