#include "holofuse/signal/recording.hpp"

#include <cmath>

#include "holofuse/errors.hpp"

namespace holofuse::signal {

void Recording::validate() const {
  if (channels == 0 || samples == 0) {
    throw DataError("recording '" + subject_id + "' is empty (C and T must be >= 1)");
  }
  if (!(sampling_rate > 0.0) || !std::isfinite(sampling_rate)) {
    throw DataError("recording '" + subject_id + "' has invalid sampling rate");
  }
  if (data.size() != channels * samples) {
    throw DataError("recording '" + subject_id + "' data size does not match C x T");
  }
  if (!channel_labels.empty() && channel_labels.size() != channels) {
    throw DataError("recording '" + subject_id + "' has " + std::to_string(channel_labels.size()) +
                    " labels for " + std::to_string(channels) + " channels");
  }
  const double duration = duration_s();
  double previous_offset = -1.0;
  for (const Annotation& a : annotations) {
    if (!(a.onset_s < a.offset_s) || a.onset_s < 0.0 || a.offset_s > duration + 1e-9) {
      throw DataError("annotation (" + std::to_string(a.onset_s) + ", " + std::to_string(a.offset_s) +
                      ") outside recording or empty");
    }
    if (a.onset_s < previous_offset) {
      throw DataError("annotations overlap or are unsorted");
    }
    previous_offset = a.offset_s;
  }
}

std::vector<std::string> default_channel_labels(std::size_t channels) {
  std::vector<std::string> labels;
  labels.reserve(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    labels.push_back("ch" + std::to_string(c));
  }
  return labels;
}

}  // namespace holofuse::signal
