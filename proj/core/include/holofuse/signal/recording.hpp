#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace holofuse::signal {

// Ictal interval in seconds from the start of the recording.
struct Annotation {
  double onset_s = 0.0;
  double offset_s = 0.0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// C x T multichannel signal, channel-major (channel 0 complete, then 1, ...).
struct Recording {
  std::string subject_id;
  std::size_t channels = 0;
  std::size_t samples = 0;
  double sampling_rate = 0.0;
  std::vector<double> data;
  std::vector<std::string> channel_labels;
  std::vector<Annotation> annotations;

  [[nodiscard]] std::span<double> channel(std::size_t c) { return std::span(data).subspan(c * samples, samples); }
  [[nodiscard]] std::span<const double> channel(std::size_t c) const {
    return std::span(data).subspan(c * samples, samples);
  }
  [[nodiscard]] double duration_s() const { return static_cast<double>(samples) / sampling_rate; }

  // Throws DataError on any broken invariant: C, T >= 1, matching sizes,
  // sorted non-overlapping annotations inside [0, T / fs] with onset < offset.
  void validate() const;
};

[[nodiscard]] std::vector<std::string> default_channel_labels(std::size_t channels);

}  // namespace holofuse::signal
