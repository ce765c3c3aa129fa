#pragma once

#include <array>
#include <span>
#include <vector>

#include "holofuse/signal/recording.hpp"

namespace holofuse::signal {

// Subtracts the across-channel median at every sample.
[[nodiscard]] Recording median_reference(const Recording& rec);

// One biquad, a0 normalized to 1.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

using Sos = std::vector<Biquad>;

// Digital Butterworth band-pass of the given prototype order (2 * order poles)
// via bilinear transform with prewarping, unit gain at the geometric centre.
[[nodiscard]] Sos butterworth_bandpass(std::size_t order, double low_hz, double high_hz, double sampling_rate);

// Complex response magnitude of the cascade at frequency f.
[[nodiscard]] double sos_gain(const Sos& sos, double frequency_hz, double sampling_rate);

// Single forward pass, transposed direct form II, with initial state scaled to
// the steady state of a constant input equal to x[0].
[[nodiscard]] std::vector<double> sosfilt(const Sos& sos, std::span<const double> x);

// Zero-phase filtering of one channel: odd reflection padding of `pad`
// samples at each end, forward pass, reversed pass, trim.
[[nodiscard]] std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x, std::size_t pad);

struct BandpassOptions {
  double low_hz = 0.5;
  double high_hz = 120.0;
  std::size_t order = 4;
};

// Padding applied by bandpass_filtfilt: 3 x the band-pass filter order (2 * order).
[[nodiscard]] std::size_t filtfilt_padding(std::size_t order);

// Throws ConfigError when high_hz is not below Nyquist.
[[nodiscard]] Recording bandpass_filtfilt(const Recording& rec, const BandpassOptions& options = {});

// Low-pass and keep every k-th sample, k = fs / target. Factor 2 uses a
// windowed-sinc half-band FIR; powers of two repeat it. The filter is applied
// centred, so annotation times in seconds are unchanged.
[[nodiscard]] Recording decimate_to(const Recording& rec, double target_rate = 512.0);

// Per channel: subtract the median and divide by 1.4826 * MAD.
[[nodiscard]] Recording robust_scale(const Recording& rec);

}  // namespace holofuse::signal
