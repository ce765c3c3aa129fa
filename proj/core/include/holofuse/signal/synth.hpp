#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "holofuse/signal/recording.hpp"

namespace holofuse::signal {

// Desk-scale stand-in for grouped iEEG. Channels are partitioned into
// electrode groups that share latent oscillatory sources. A seizure is a
// sustained rhythmic burst in the subject's onset group. Two kinds of
// distractor make it hard to detect from partial information:
//  - spatial: the same burst, just as long, in a non-onset group;
//  - temporal: a short burst in the onset group.
// Distractors sit inside the seizure's context window.
struct SynthSpec {
  std::size_t subjects = 16;
  std::size_t channels_min = 32;
  std::size_t channels_max = 128;
  std::size_t group_size_min = 4;
  std::size_t group_size_max = 12;
  std::size_t seizures = 4;
  double duration_s = 1920.0;
  double sampling_rate = 512.0;
  double seizure_min_s = 40.0;
  double seizure_max_s = 80.0;
  // Each seizure sits in its own slot with at least this much margin on each side.
  double context_s = 180.0;
  std::size_t spatial_distractors = 1;
  std::size_t temporal_distractors = 3;
  double temporal_min_s = 8.0;
  double temporal_max_s = 14.0;
  // Minimum quiet gap between any two events.
  double event_gap_s = 20.0;
  double burst_amplitude = 4.0;
  double burst_freq_min_hz = 2.5;
  double burst_freq_max_hz = 3.5;
  double background_freq_min_hz = 5.0;
  double background_freq_max_hz = 10.0;
  double noise = 0.5;
  double microvolts = 50.0;
  // Shuffle channel order so group membership is not contiguous.
  bool interleave_groups = true;
  // When set, every subject gets exactly these seizures and no distractors.
  std::vector<Annotation> planted;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
};

enum class EventKind { seizure, spatial_distractor, temporal_distractor };

struct SynthEvent {
  EventKind kind = EventKind::seizure;
  double onset_s = 0.0;
  double offset_s = 0.0;
  int group = 0;
};

struct SynthSubject {
  Recording recording;
  std::vector<int> channel_groups;
  int onset_group = 0;
  std::vector<SynthEvent> events;
};

[[nodiscard]] SynthSubject synth_subject(const SynthSpec& spec, std::size_t index);
[[nodiscard]] std::vector<SynthSubject> synth_generate(const SynthSpec& spec);

[[nodiscard]] const char* to_string(EventKind kind);

}  // namespace holofuse::signal
