#include "holofuse/signal/patches.hpp"

#include <algorithm>
#include <cmath>

#include "holofuse/errors.hpp"

namespace holofuse::signal {

namespace {

std::size_t whole_samples(double seconds, double rate, const char* what) {
  const double n = seconds * rate;
  const double rounded = std::round(n);
  if (!(seconds > 0.0) || rounded < 1.0 || std::abs(n - rounded) > 1e-6) {
    throw ConfigError(std::string(what) + " of " + std::to_string(seconds) + " s is not a whole number of samples at " +
                      std::to_string(rate) + " Hz");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

bool is_ictal_span(double start_s, double end_s, std::span<const Annotation> annotations) {
  double overlap = 0.0;
  for (const Annotation& a : annotations) {
    overlap += std::max(0.0, std::min(end_s, a.offset_s) - std::max(start_s, a.onset_s));
  }
  return overlap >= 0.5 * (end_s - start_s) - 1e-9;
}

PatchLayout make_patch_layout(const Recording& rec, double window_s, double stride_s) {
  rec.validate();
  PatchLayout layout;
  layout.sampling_rate = rec.sampling_rate;
  layout.window_samples = whole_samples(window_s, rec.sampling_rate, "patch window");
  layout.stride_samples = whole_samples(stride_s, rec.sampling_rate, "patch stride");
  if (rec.samples < layout.window_samples) {
    throw DataError("recording '" + rec.subject_id + "' (" + std::to_string(rec.duration_s()) +
                    " s) is shorter than one patch window");
  }
  layout.count = (rec.samples - layout.window_samples) / layout.stride_samples + 1;
  layout.labels.resize(layout.count);
  for (std::size_t j = 0; j < layout.count; ++j) {
    layout.labels[j] = is_ictal_span(layout.start_s(j), layout.end_s(j), rec.annotations) ? 1 : 0;
  }
  return layout;
}

PatchSet make_patches(const Recording& rec, double window_s, double stride_s) {
  PatchSet set;
  set.layout = make_patch_layout(rec, window_s, stride_s);
  set.patches.resize(rec.channels);
  for (std::size_t c = 0; c < rec.channels; ++c) {
    const auto ch = rec.channel(c);
    auto& seq = set.patches[c];
    seq.reserve(set.layout.count);
    for (std::size_t j = 0; j < set.layout.count; ++j) {
      const auto begin = ch.begin() + static_cast<std::ptrdiff_t>(j * set.layout.stride_samples);
      encoder::Patch p;
      p.channel_index = c;
      p.patch_index = j;
      p.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(set.layout.window_samples));
      p.window_seconds = window_s;
      p.stride_seconds = stride_s;
      seq.push_back(std::move(p));
    }
  }
  return set;
}

}  // namespace holofuse::signal
