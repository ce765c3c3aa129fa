#include "holofuse/pipeline/data.hpp"

#include <algorithm>
#include <cmath>

#include "holofuse/errors.hpp"
#include "holofuse/signal/preprocess.hpp"

namespace holofuse::pipeline {

std::size_t PreparedSubject::seizure_count() const {
  std::size_t n = 0;
  for (const PreparedRecording& r : recordings) n += r.signal.annotations.size();
  return n;
}

signal::Recording preprocess(const signal::Recording& raw, const PreprocessConfig& config) {
  signal::BandpassOptions band;
  band.low_hz = config.band_low_hz;
  band.high_hz = config.band_high_hz;
  band.order = config.filter_order;
  signal::Recording out = signal::bandpass_filtfilt(signal::median_reference(signal::decimate_to(raw, config.target_rate_hz)), band);
  if (config.robust_scale) out = signal::robust_scale(out);
  return out;
}

PreparedSubject prepare_subject(const signal::SubjectData& data, const PreprocessConfig& config, double window_s,
                                double stride_s) {
  PreparedSubject out;
  out.subject_id = data.subject_id;
  out.channel_groups = data.channel_groups;
  out.onset_group = data.onset_group;
  for (const signal::Recording& raw : data.recordings) {
    PreparedRecording rec;
    rec.signal = preprocess(raw, config);
    rec.layout = signal::make_patch_layout(rec.signal, window_s, stride_s);
    out.recordings.push_back(std::move(rec));
  }
  if (out.recordings.empty()) throw DataError("subject '" + data.subject_id + "' has no recordings");
  return out;
}

std::vector<PreparedSubject> prepare_subjects(const std::vector<signal::SubjectData>& data,
                                              const PreprocessConfig& config, double window_s, double stride_s) {
  std::vector<PreparedSubject> out;
  out.reserve(data.size());
  for (const signal::SubjectData& d : data) out.push_back(prepare_subject(d, config, window_s, stride_s));
  return out;
}

std::string SeizureUnit::id() const {
  return "r" + std::to_string(range.recording) + "/s" + std::to_string(seizure);
}

std::vector<SeizureUnit> seizure_units(const PreparedSubject& subject, double context_s, std::size_t memory_length) {
  std::vector<SeizureUnit> units;
  std::size_t index = 0;
  for (std::size_t r = 0; r < subject.recordings.size(); ++r) {
    const signal::PatchLayout& l = subject.recordings[r].layout;
    const double stride = static_cast<double>(l.stride_samples) / l.sampling_rate;
    const double window = static_cast<double>(l.window_samples) / l.sampling_rate;
    for (const signal::Annotation& a : subject.recordings[r].signal.annotations) {
      const double lo = a.onset_s - context_s;
      const double hi = a.offset_s + context_s;
      // First patch starting at or after lo, last patch ending at or before hi.
      const double first_f = std::max(0.0, std::ceil(lo / stride - 1e-9));
      const double last_f = std::floor((hi - window) / stride + 1e-9);
      SeizureUnit u;
      u.seizure = index++;
      u.annotation = a;
      u.range.recording = r;
      u.range.first = static_cast<std::size_t>(first_f);
      u.range.last = last_f < 0.0 ? 0 : std::min(static_cast<std::size_t>(last_f), l.count - 1);
      if (last_f < first_f || u.range.size() < memory_length) {
        throw DataError("seizure " + std::to_string(u.seizure) + " of subject '" + subject.subject_id +
                        "' has fewer than memory_length patches of context");
      }
      units.push_back(u);
    }
  }
  return units;
}

std::vector<PatchRange> subtract_ranges(const PatchRange& range, const std::vector<PatchRange>& holes,
                                        std::size_t min_size) {
  std::vector<PatchRange> pieces{range};
  for (const PatchRange& h : holes) {
    std::vector<PatchRange> next;
    for (const PatchRange& p : pieces) {
      if (!p.overlaps(h)) {
        next.push_back(p);
        continue;
      }
      if (h.first > p.first) next.push_back({p.recording, p.first, h.first - 1});
      if (h.last < p.last) next.push_back({p.recording, h.last + 1, p.last});
    }
    pieces = std::move(next);
  }
  std::erase_if(pieces, [&](const PatchRange& p) { return p.size() < min_size; });
  return pieces;
}

nn::Tensor patch_tensor(const PreparedRecording& rec, std::size_t first, std::size_t count) {
  const std::size_t C = rec.signal.channels;
  const std::size_t W = rec.layout.window_samples;
  if (first + count > rec.layout.count) throw ShapeError("patch range beyond recording");
  nn::Tensor t({count * C, 1, W});
  double* out = t.data().data();
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t start = (first + p) * rec.layout.stride_samples;
    for (std::size_t c = 0; c < C; ++c) {
      const auto ch = rec.signal.channel(c);
      std::copy(ch.begin() + static_cast<std::ptrdiff_t>(start), ch.begin() + static_cast<std::ptrdiff_t>(start + W),
                out + (p * C + c) * W);
    }
  }
  return t;
}

}  // namespace holofuse::pipeline
