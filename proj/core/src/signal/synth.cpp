#include "holofuse/signal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "holofuse/errors.hpp"
#include "holofuse/random.hpp"

namespace holofuse::signal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform_index(rng, hi - lo + 1));
}

// Unit-variance AR(1) noise.
std::vector<double> ar1(Rng& rng, std::size_t n, double phi) {
  std::vector<double> x(n);
  const double innovation = std::sqrt(1.0 - phi * phi);
  double s = gaussian(rng);
  for (std::size_t t = 0; t < n; ++t) {
    s = phi * s + innovation * gaussian(rng);
    x[t] = s;
  }
  return x;
}

// Sharpened rhythmic waveform with raised-cosine ramps of `ramp` seconds.
void add_burst(std::vector<double>& source, double fs, double onset, double offset, double freq, double amplitude,
               double phase) {
  const double ramp = std::min(2.0, 0.25 * (offset - onset));
  const auto first = static_cast<std::size_t>(std::max(0.0, std::floor(onset * fs)));
  const auto last = std::min(source.size(), static_cast<std::size_t>(std::ceil(offset * fs)));
  for (std::size_t t = first; t < last; ++t) {
    const double time = static_cast<double>(t) / fs;
    if (time < onset || time >= offset) {
      continue;
    }
    double env = 1.0;
    if (time - onset < ramp) {
      env = 0.5 - 0.5 * std::cos(std::numbers::pi * (time - onset) / ramp);
    } else if (offset - time < ramp) {
      env = 0.5 - 0.5 * std::cos(std::numbers::pi * (offset - time) / ramp);
    }
    const double p = kTwoPi * freq * (time - onset) + phase;
    source[t] += amplitude * env * (std::sin(p) + 0.5 * std::sin(2.0 * p) + 0.25 * std::sin(3.0 * p));
  }
}

bool fits(const std::vector<SynthEvent>& placed, double onset, double offset, double gap) {
  for (const SynthEvent& e : placed) {
    if (onset < e.offset_s + gap && offset > e.onset_s - gap) {
      return false;
    }
  }
  return true;
}

}  // namespace

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::seizure:
      return "seizure";
    case EventKind::spatial_distractor:
      return "spatial_distractor";
    case EventKind::temporal_distractor:
      return "temporal_distractor";
  }
  return "?";
}

void SynthSpec::validate() const {
  const auto fail = [](const std::string& what) { throw ConfigError("synth: " + what); };
  if (subjects == 0) fail("subjects must be >= 1");
  if (channels_min == 0 || channels_min > channels_max) fail("channel range must satisfy 1 <= min <= max");
  if (group_size_min == 0 || group_size_min > group_size_max) fail("group size range must satisfy 1 <= min <= max");
  if (!(sampling_rate > 0.0) || !(duration_s > 0.0)) fail("sampling rate and duration must be positive");
  if (!(burst_freq_max_hz < 0.5 * sampling_rate) || !(background_freq_max_hz < 0.5 * sampling_rate)) {
    fail("source frequencies must be below Nyquist");
  }
  if (burst_freq_min_hz > burst_freq_max_hz || background_freq_min_hz > background_freq_max_hz) {
    fail("frequency ranges must satisfy min <= max");
  }
  if (!planted.empty()) {
    Recording probe;
    probe.subject_id = "planted";
    probe.channels = 1;
    probe.samples = static_cast<std::size_t>(std::llround(duration_s * sampling_rate));
    probe.sampling_rate = sampling_rate;
    probe.data.assign(probe.samples, 0.0);
    probe.annotations = planted;
    try {
      probe.validate();
    } catch (const DataError& e) {
      fail(std::string("planted seizures: ") + e.what());
    }
    return;
  }
  if (seizures > 0) {
    if (!(seizure_min_s > 0.0) || seizure_min_s > seizure_max_s) fail("seizure duration range invalid");
    if (!(temporal_min_s > 0.0) || temporal_min_s > temporal_max_s) fail("temporal distractor range invalid");
    const double slot = duration_s / static_cast<double>(seizures);
    if (slot < 2.0 * context_s + seizure_max_s) {
      fail("duration too short: each seizure needs " + std::to_string(2.0 * context_s + seizure_max_s) +
           " s but slots are " + std::to_string(slot) + " s");
    }
  }
}

SynthSubject synth_subject(const SynthSpec& spec, std::size_t index) {
  const std::string tag = "synth/subject" + std::to_string(index);
  Rng rng = make_stream(spec.seed, tag);
  SynthSubject out;
  Recording& rec = out.recording;
  rec.subject_id = "sub" + std::string(index < 10 ? "0" : "") + std::to_string(index);
  rec.channels = uniform_int(rng, spec.channels_min, spec.channels_max);
  rec.sampling_rate = spec.sampling_rate;
  rec.samples = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sampling_rate));
  rec.channel_labels = default_channel_labels(rec.channels);
  const double fs = spec.sampling_rate;
  const std::size_t C = rec.channels;

  // Groups in slot order, then optionally scattered over the channel order.
  std::vector<int> slot_group;
  std::vector<std::size_t> group_size;
  while (slot_group.size() < C) {
    const std::size_t size = std::min(uniform_int(rng, spec.group_size_min, spec.group_size_max), C - slot_group.size());
    slot_group.insert(slot_group.end(), size, static_cast<int>(group_size.size()));
    group_size.push_back(size);
  }
  std::vector<std::size_t> order(C);
  for (std::size_t c = 0; c < C; ++c) order[c] = c;
  if (spec.interleave_groups) {
    for (std::size_t i = C; i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
  }
  out.channel_groups.assign(C, 0);
  for (std::size_t s = 0; s < C; ++s) {
    out.channel_groups[order[s]] = slot_group[s];
  }
  const std::size_t groups = group_size.size();

  // Onset and distractor groups are drawn among the largest groups so the
  // number of bursting channels carries no information.
  const std::size_t largest = *std::max_element(group_size.begin(), group_size.end());
  std::vector<int> full;
  for (std::size_t g = 0; g < groups; ++g) {
    if (group_size[g] == largest) full.push_back(static_cast<int>(g));
  }
  out.onset_group = full[uniform_index(rng, full.size())];
  std::vector<int> others;
  for (int g : full) {
    if (g != out.onset_group) others.push_back(g);
  }
  if (others.empty()) {
    for (std::size_t g = 0; g < groups; ++g) {
      if (static_cast<int>(g) != out.onset_group) others.push_back(static_cast<int>(g));
    }
  }

  // Events.
  if (!spec.planted.empty()) {
    for (const Annotation& a : spec.planted) {
      out.events.push_back({EventKind::seizure, a.onset_s, a.offset_s, out.onset_group});
    }
  } else if (spec.seizures > 0) {
    const double slot = spec.duration_s / static_cast<double>(spec.seizures);
    for (std::size_t k = 0; k < spec.seizures; ++k) {
      const double slot_start = slot * static_cast<double>(k);
      const double dur = uniform(rng, spec.seizure_min_s, spec.seizure_max_s);
      const double onset = uniform(rng, slot_start + spec.context_s, slot_start + slot - spec.context_s - dur);
      std::vector<SynthEvent> placed{{EventKind::seizure, onset, onset + dur, out.onset_group}};
      const double lo = std::max(slot_start, onset - spec.context_s);
      const double hi = std::min(slot_start + slot, onset + dur + spec.context_s);
      const auto place = [&](EventKind kind, double length, int group) {
        if (hi - length < lo) {
          throw ConfigError("synth: distractor longer than the seizure context");
        }
        for (int attempt = 0; attempt < 2000; ++attempt) {
          const double start = uniform(rng, lo, hi - length);
          if (fits(placed, start, start + length, spec.event_gap_s)) {
            placed.push_back({kind, start, start + length, group});
            return;
          }
        }
        throw ConfigError("synth: cannot fit distractors into the seizure context; lengthen context_s");
      };
      for (std::size_t i = 0; i < spec.spatial_distractors && !others.empty(); ++i) {
        place(EventKind::spatial_distractor, uniform(rng, spec.seizure_min_s, spec.seizure_max_s),
              others[uniform_index(rng, others.size())]);
      }
      for (std::size_t i = 0; i < spec.temporal_distractors; ++i) {
        place(EventKind::temporal_distractor, uniform(rng, spec.temporal_min_s, spec.temporal_max_s),
              out.onset_group);
      }
      out.events.insert(out.events.end(), placed.begin(), placed.end());
    }
  }
  std::sort(out.events.begin(), out.events.end(),
            [](const SynthEvent& a, const SynthEvent& b) { return a.onset_s < b.onset_s; });
  for (const SynthEvent& e : out.events) {
    if (e.kind == EventKind::seizure) rec.annotations.push_back({e.onset_s, e.offset_s});
  }

  // Latent group sources: a slowly modulated rhythm plus coloured noise.
  const std::size_t T = rec.samples;
  const double env_phi = std::exp(-1.0 / (2.0 * fs));
  std::vector<std::vector<double>> sources(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    Rng grng = make_stream(spec.seed, tag + "/group" + std::to_string(g));
    const double freq = uniform(grng, spec.background_freq_min_hz, spec.background_freq_max_hz);
    const double phase = uniform(grng, 0.0, kTwoPi);
    const std::vector<double> env = ar1(grng, T, env_phi);
    const std::vector<double> colored = ar1(grng, T, std::exp(-20.0 / fs));
    auto& s = sources[g];
    s.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const double time = static_cast<double>(t) / fs;
      s[t] = (1.0 + 0.3 * env[t]) * std::sin(kTwoPi * freq * time + phase) + 0.7 * colored[t];
    }
  }
  Rng erng = make_stream(spec.seed, tag + "/events");
  for (const SynthEvent& e : out.events) {
    const double freq = uniform(erng, spec.burst_freq_min_hz, spec.burst_freq_max_hz);
    add_burst(sources[static_cast<std::size_t>(e.group)], fs, e.onset_s, e.offset_s, freq, spec.burst_amplitude,
              uniform(erng, 0.0, kTwoPi));
  }

  // Channels: gain x (group source) + shared drift + independent noise.
  Rng crng = make_stream(spec.seed, tag + "/channels");
  const std::vector<double> common = ar1(crng, T, std::exp(-2.0 / fs));
  rec.data.resize(C * T);
  for (std::size_t c = 0; c < C; ++c) {
    const double gain = uniform(crng, 0.7, 1.3);
    const auto& s = sources[static_cast<std::size_t>(out.channel_groups[c])];
    for (std::size_t t = 0; t < T; ++t) {
      rec.data[c * T + t] = spec.microvolts * (gain * s[t] + 0.5 * common[t] + spec.noise * gaussian(crng));
    }
  }
  rec.validate();
  return out;
}

std::vector<SynthSubject> synth_generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<SynthSubject> out;
  out.reserve(spec.subjects);
  for (std::size_t i = 0; i < spec.subjects; ++i) {
    out.push_back(synth_subject(spec, i));
  }
  return out;
}

}  // namespace holofuse::signal
