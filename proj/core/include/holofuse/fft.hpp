#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace holofuse {

using Complex = std::complex<double>;

// Real-input discrete Fourier transform of fixed length n.
//
// Convention: the forward transform is unnormalized,
//   X_k = sum_n x_n exp(-2 pi i k n / N),
// and the inverse carries the 1/N factor. Only the non-redundant half
// spectrum (n/2 + 1 bins) is stored; the rest follows from conjugate
// symmetry. Instances are immutable and safe to share between threads.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] std::size_t bins() const noexcept { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<Complex> out) const;
  // Imaginary parts of the DC (and, for even n, Nyquist) bins are ignored.
  void inverse(std::span<const Complex> in, std::span<double> out) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

// Shared, lazily planned transform for length n (n >= 1).
[[nodiscard]] std::shared_ptr<const RealFft> real_fft(std::size_t n);

// Weight of half-spectrum bin k in a full-spectrum sum over all n bins:
// 1 for DC and (even n) Nyquist, 2 for bins that have a mirrored partner.
[[nodiscard]] inline double half_spectrum_weight(std::size_t k, std::size_t n) noexcept {
  if (k == 0) return 1.0;
  if (n % 2 == 0 && k == n / 2) return 1.0;
  return 2.0;
}

}  // namespace holofuse
