#include "holofuse/signal/curation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "holofuse/errors.hpp"
#include "holofuse/fft.hpp"
#include "holofuse/random.hpp"

namespace holofuse::signal {

namespace {

struct Window {
  std::size_t source = 0;
  std::size_t index = 0;
  double power = 0.0;
};

bool near_seizure(double start, double end, const Recording& rec, double context) {
  for (const Annotation& a : rec.annotations) {
    if (start < a.offset_s + context && end > a.onset_s - context) {
      return true;
    }
  }
  return false;
}

}  // namespace

double delta_power(const Recording& rec, std::size_t start, std::size_t length, double low_hz, double high_hz) {
  const auto fft = real_fft(length);
  std::vector<double> buf(length);
  std::vector<Complex> spec(fft->bins());
  std::vector<double> hann(length);
  for (std::size_t i = 0; i < length; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(length));
  }
  const double df = rec.sampling_rate / static_cast<double>(length);
  double total = 0.0;
  for (std::size_t c = 0; c < rec.channels; ++c) {
    const auto ch = rec.channel(c).subspan(start, length);
    for (std::size_t i = 0; i < length; ++i) {
      buf[i] = ch[i] * hann[i];
    }
    fft->forward(buf, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double f = static_cast<double>(k) * df;
      if (f >= low_hz && f <= high_hz) {
        total += half_spectrum_weight(k, length) * std::norm(spec[k]);
      }
    }
  }
  return total / static_cast<double>(rec.channels);
}

CuratedDataset delta_curate(std::span<const CurationSource> sources, const CurationOptions& options) {
  if (options.bin_count == 0 || !(options.window_s > 0.0) || !(options.minutes_per_bin > 0.0)) {
    throw ConfigError("curation needs bin_count >= 1 and positive window/minutes");
  }
  if (sources.empty()) {
    throw DataError("curation needs at least one recording");
  }
  CuratedDataset out;
  out.subject_id = sources.front().recording->subject_id;

  std::vector<Window> windows;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const Recording& rec = *sources[s].recording;
    rec.validate();
    const double length_f = options.window_s * rec.sampling_rate;
    const auto length = static_cast<std::size_t>(std::llround(length_f));
    if (std::abs(length_f - static_cast<double>(length)) > 1e-6 || length < 2) {
      throw ConfigError("curation window is not a whole number of samples");
    }
    const std::size_t count = rec.samples / length;
    for (std::size_t w = 0; w < count; ++w) {
      const double start = static_cast<double>(w) * options.window_s;
      if (near_seizure(start, start + options.window_s, rec, options.ictal_context_s)) {
        continue;
      }
      windows.push_back({s, w, delta_power(rec, w * length, length, options.delta_low_hz, options.delta_high_hz)});
    }
    for (const Annotation& a : rec.annotations) {
      CuratedSegment seg;
      seg.source = sources[s].path;
      seg.start_s = std::max(0.0, a.onset_s - options.ictal_context_s);
      seg.end_s = std::min(rec.duration_s(), a.offset_s + options.ictal_context_s);
      seg.ictal = true;
      out.segments.push_back(seg);
    }
  }

  const auto need = static_cast<std::size_t>(std::llround(options.minutes_per_bin * 60.0 / options.window_s));
  const std::size_t need_total = need * options.bin_count;
  if (windows.size() < need_total) {
    std::ostringstream msg;
    const double have_min = static_cast<double>(windows.size()) * options.window_s / 60.0;
    const double need_min = static_cast<double>(need_total) * options.window_s / 60.0;
    msg << "insufficient non-ictal data for subject '" << out.subject_id << "': need " << need_min << " min ("
        << options.bin_count << " bins x " << options.minutes_per_bin << " min), have " << have_min
        << " min, shortfall " << (need_min - have_min) << " min";
    throw DataError(msg.str());
  }

  std::stable_sort(windows.begin(), windows.end(), [](const Window& a, const Window& b) { return a.power < b.power; });
  const std::size_t n = windows.size();
  std::vector<CuratedSegment> selected;
  for (std::size_t b = 0; b < options.bin_count; ++b) {
    const std::size_t lo = b * n / options.bin_count;
    const std::size_t hi = (b + 1) * n / options.bin_count;
    out.bin_upper_power.push_back(windows[hi - 1].power);
    std::vector<Window> members(windows.begin() + static_cast<std::ptrdiff_t>(lo),
                                windows.begin() + static_cast<std::ptrdiff_t>(hi));
    Rng rng = make_stream(options.seed, "curate/bin" + std::to_string(b));
    for (std::size_t i = 0; i < need; ++i) {
      const std::size_t j = i + uniform_index(rng, members.size() - i);
      std::swap(members[i], members[j]);
    }
    members.resize(need);
    std::sort(members.begin(), members.end(), [](const Window& x, const Window& y) {
      return x.source != y.source ? x.source < y.source : x.index < y.index;
    });
    // Merge runs of adjacent windows into one segment.
    for (std::size_t i = 0; i < members.size();) {
      std::size_t k = i + 1;
      while (k < members.size() && members[k].source == members[i].source &&
             members[k].index == members[k - 1].index + 1) {
        ++k;
      }
      CuratedSegment seg;
      seg.source = sources[members[i].source].path;
      seg.start_s = static_cast<double>(members[i].index) * options.window_s;
      seg.end_s = static_cast<double>(members[k - 1].index + 1) * options.window_s;
      seg.bin = static_cast<int>(b);
      selected.push_back(seg);
      i = k;
    }
    out.seconds_per_bin.push_back(static_cast<double>(need) * options.window_s);
  }
  out.segments.insert(out.segments.end(), selected.begin(), selected.end());
  std::stable_sort(out.segments.begin(), out.segments.end(), [](const CuratedSegment& a, const CuratedSegment& b) {
    return a.source != b.source ? a.source < b.source : a.start_s < b.start_s;
  });
  return out;
}

nlohmann::json to_json(const CuratedDataset& dataset) {
  nlohmann::json segments = nlohmann::json::array();
  for (const CuratedSegment& s : dataset.segments) {
    segments.push_back({{"source", s.source},
                        {"start_s", s.start_s},
                        {"end_s", s.end_s},
                        {"bin", s.bin},
                        {"ictal", s.ictal}});
  }
  return {{"subject_id", dataset.subject_id},
          {"bin_upper_power", dataset.bin_upper_power},
          {"seconds_per_bin", dataset.seconds_per_bin},
          {"segments", segments}};
}

}  // namespace holofuse::signal
