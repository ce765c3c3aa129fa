#include "holofuse/signal/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "holofuse/errors.hpp"

namespace holofuse::signal {

namespace {

using cd = std::complex<double>;

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Recording with_data(const Recording& rec, std::vector<double> data, std::size_t samples, double rate) {
  Recording out;
  out.subject_id = rec.subject_id;
  out.channels = rec.channels;
  out.samples = samples;
  out.sampling_rate = rate;
  out.data = std::move(data);
  out.channel_labels = rec.channel_labels;
  out.annotations = rec.annotations;
  return out;
}

// Odd reflection about the end points: x[0] - (x[k] - x[0]).
std::vector<double> odd_extend(std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext[pad - 1 - i] = 2.0 * x[0] - x[std::min(i + 1, n - 1)];
    ext[pad + n + i] = 2.0 * x[n - 1] - x[n >= i + 2 ? n - 2 - i : 0];
  }
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  return ext;
}

// Symmetric FIR applied centred, with odd reflection at both ends.
std::vector<double> fir_centered(std::span<const double> x, const std::vector<double>& h) {
  const std::size_t half = h.size() / 2;
  const std::size_t n = x.size();
  const std::size_t pad = std::min(half, n > 1 ? n - 1 : 0);
  std::vector<double> ext = odd_extend(x, pad);
  const auto last = static_cast<std::ptrdiff_t>(ext.size()) - 1;
  std::vector<double> y(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      // x[t + half - k], clamped when the signal is shorter than the filter.
      const auto idx = static_cast<std::ptrdiff_t>(t + pad + half) - static_cast<std::ptrdiff_t>(k);
      acc += h[k] * ext[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, last))];
    }
    y[t] = acc;
  }
  return y;
}

// Blackman-windowed sinc low-pass, cutoff at `cutoff` cycles per sample, unit DC gain.
std::vector<double> windowed_sinc(double cutoff, std::size_t half_taps) {
  const std::size_t taps = 2 * half_taps + 1;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double m = static_cast<double>(i) - static_cast<double>(half_taps);
    const double x = 2.0 * cutoff * m;
    const double sinc = m == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(taps - 1);
    const double w = 0.42 - 0.5 * std::cos(phase) + 0.08 * std::cos(2.0 * phase);
    h[i] = sinc * w;
    sum += h[i];
  }
  for (double& v : h) {
    v /= sum;
  }
  return h;
}

Recording decimate_by(const Recording& rec, std::size_t factor) {
  // Half-band for factor 2; generic windowed sinc otherwise.
  const double cutoff = 0.5 / static_cast<double>(factor);
  const std::vector<double> h = windowed_sinc(cutoff, 32 * factor);
  const std::size_t out_samples = (rec.samples + factor - 1) / factor;
  std::vector<double> data(rec.channels * out_samples);
  for (std::size_t c = 0; c < rec.channels; ++c) {
    const std::vector<double> y = fir_centered(rec.channel(c), h);
    for (std::size_t t = 0; t < out_samples; ++t) {
      data[c * out_samples + t] = y[t * factor];
    }
  }
  return with_data(rec, std::move(data), out_samples, rec.sampling_rate / static_cast<double>(factor));
}

}  // namespace

Recording median_reference(const Recording& rec) {
  rec.validate();
  Recording out = rec;
  std::vector<double> column(rec.channels);
  for (std::size_t t = 0; t < rec.samples; ++t) {
    for (std::size_t c = 0; c < rec.channels; ++c) {
      column[c] = rec.data[c * rec.samples + t];
    }
    const double med = median_inplace(column);
    for (std::size_t c = 0; c < rec.channels; ++c) {
      out.data[c * rec.samples + t] -= med;
    }
  }
  return out;
}

Sos butterworth_bandpass(std::size_t order, double low_hz, double high_hz, double sampling_rate) {
  if (order == 0) {
    throw ConfigError("Butterworth order must be >= 1");
  }
  const double nyquist = 0.5 * sampling_rate;
  if (!(low_hz > 0.0) || !(low_hz < high_hz)) {
    throw ConfigError("band-pass edges must satisfy 0 < low < high");
  }
  if (!(high_hz < nyquist)) {
    throw ConfigError("band-pass high edge " + std::to_string(high_hz) + " Hz is not below Nyquist (" +
                      std::to_string(nyquist) + " Hz)");
  }
  const double fs2 = 2.0 * sampling_rate;
  const double w1 = fs2 * std::tan(std::numbers::pi * low_hz / sampling_rate);
  const double w2 = fs2 * std::tan(std::numbers::pi * high_hz / sampling_rate);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  std::vector<cd> zpoles;
  const auto n = static_cast<double>(order);
  for (std::size_t k = 0; k < order; ++k) {
    const double angle = std::numbers::pi * (2.0 * static_cast<double>(k) + n + 1.0) / (2.0 * n);
    const cd p = std::polar(1.0, angle);
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0 * w0);
    for (const cd s : {half + root, half - root}) {
      zpoles.push_back((1.0 + s / fs2) / (1.0 - s / fs2));
    }
  }

  Sos sos;
  std::vector<double> reals;
  for (const cd z : zpoles) {
    if (z.imag() > 1e-12) {
      Biquad q;
      q.b = {1.0, 0.0, -1.0};
      q.a = {1.0, -2.0 * z.real(), std::norm(z)};
      sos.push_back(q);
    } else if (std::abs(z.imag()) <= 1e-12) {
      reals.push_back(z.real());
    }
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    Biquad q;
    q.b = {1.0, 0.0, -1.0};
    q.a = {1.0, -(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]};
    sos.push_back(q);
  }
  if (sos.size() != order) {
    throw NumericError("Butterworth pole pairing failed");
  }

  const double centre = 2.0 * std::atan(w0 / fs2) * sampling_rate / (2.0 * std::numbers::pi);
  const double gain = sos_gain(sos, centre, sampling_rate);
  const double per_section = std::pow(gain, -1.0 / n);
  for (Biquad& q : sos) {
    for (double& b : q.b) {
      b *= per_section;
    }
  }
  return sos;
}

double sos_gain(const Sos& sos, double frequency_hz, double sampling_rate) {
  const cd z = std::polar(1.0, -2.0 * std::numbers::pi * frequency_hz / sampling_rate);
  cd h = 1.0;
  for (const Biquad& q : sos) {
    const cd num = q.b[0] + q.b[1] * z + q.b[2] * z * z;
    const cd den = q.a[0] + q.a[1] * z + q.a[2] * z * z;
    h *= num / den;
  }
  return std::abs(h);
}

std::vector<double> sosfilt(const Sos& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) {
    return y;
  }
  // Steady-state DF2T state for a unit step, scaled by the first input of each stage.
  for (const Biquad& q : sos) {
    const double a1 = q.a[1];
    const double a2 = q.a[2];
    const double b0 = q.b[0];
    const double b1 = q.b[1];
    const double b2 = q.b[2];
    const double dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
    const double x0 = y[0];
    double z1 = (b1 + b2 - (a1 + a2) * dc) * x0;
    double z2 = (b2 - a2 * dc) * x0;
    for (double& v : y) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  if (n == 0) {
    return {};
  }
  pad = std::min(pad, n - 1);
  std::vector<double> ext = odd_extend(x, pad);
  ext = sosfilt(sos, ext);
  std::reverse(ext.begin(), ext.end());
  ext = sosfilt(sos, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::size_t filtfilt_padding(std::size_t order) { return 3 * 2 * order; }

Recording bandpass_filtfilt(const Recording& rec, const BandpassOptions& options) {
  rec.validate();
  const Sos sos = butterworth_bandpass(options.order, options.low_hz, options.high_hz, rec.sampling_rate);
  Recording out = rec;
  const std::size_t pad = filtfilt_padding(options.order);
  for (std::size_t c = 0; c < rec.channels; ++c) {
    const std::vector<double> y = sosfiltfilt(sos, rec.channel(c), pad);
    std::copy(y.begin(), y.end(), out.channel(c).begin());
  }
  return out;
}

Recording decimate_to(const Recording& rec, double target_rate) {
  rec.validate();
  if (!(target_rate > 0.0)) {
    throw ConfigError("target sampling rate must be positive");
  }
  const double ratio = rec.sampling_rate / target_rate;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw DataError("unsupported sampling rate " + std::to_string(rec.sampling_rate) +
                    " Hz: not an integer multiple of " + std::to_string(target_rate) + " Hz");
  }
  auto factor = static_cast<std::size_t>(rounded);
  Recording out = rec;
  while (factor > 1 && factor % 2 == 0) {
    out = decimate_by(out, 2);
    factor /= 2;
  }
  if (factor > 1) {
    out = decimate_by(out, factor);
  }
  out.sampling_rate = target_rate;
  return out;
}

Recording robust_scale(const Recording& rec) {
  rec.validate();
  Recording out = rec;
  std::vector<double> buf(rec.samples);
  for (std::size_t c = 0; c < rec.channels; ++c) {
    auto ch = out.channel(c);
    std::copy(ch.begin(), ch.end(), buf.begin());
    const double med = median_inplace(buf);
    for (std::size_t t = 0; t < rec.samples; ++t) {
      buf[t] = std::abs(ch[t] - med);
    }
    const double mad = 1.4826 * median_inplace(buf);
    const double scale = mad > 0.0 ? 1.0 / mad : 1.0;
    for (double& v : ch) {
      v = (v - med) * scale;
    }
  }
  return out;
}

}  // namespace holofuse::signal
