#pragma once

#include <string>
#include <vector>

#include "holofuse/nn/tensor.hpp"
#include "holofuse/pipeline/config.hpp"
#include "holofuse/signal/dataset_io.hpp"
#include "holofuse/signal/patches.hpp"

namespace holofuse::pipeline {

struct PreparedRecording {
  signal::Recording signal;  // after decimate -> median reference -> band-pass (-> robust scale)
  signal::PatchLayout layout;
};

struct PreparedSubject {
  std::string subject_id;
  std::vector<PreparedRecording> recordings;
  std::vector<int> channel_groups;
  int onset_group = -1;

  [[nodiscard]] std::size_t channels() const { return recordings.empty() ? 0 : recordings.front().signal.channels; }
  [[nodiscard]] std::size_t seizure_count() const;
};

[[nodiscard]] signal::Recording preprocess(const signal::Recording& raw, const PreprocessConfig& config);

[[nodiscard]] PreparedSubject prepare_subject(const signal::SubjectData& data, const PreprocessConfig& config,
                                              double window_s, double stride_s);
[[nodiscard]] std::vector<PreparedSubject> prepare_subjects(const std::vector<signal::SubjectData>& data,
                                                            const PreprocessConfig& config, double window_s,
                                                            double stride_s);

// Inclusive patch range [first, last] of one recording.
struct PatchRange {
  std::size_t recording = 0;
  std::size_t first = 0;
  std::size_t last = 0;

  [[nodiscard]] std::size_t size() const { return last - first + 1; }
  [[nodiscard]] bool overlaps(const PatchRange& o) const {
    return recording == o.recording && first <= o.last && o.first <= last;
  }
};

// One seizure with its context: the patches lying wholly inside
// [onset - context, offset + context], clipped to the recording.
struct SeizureUnit {
  std::size_t seizure = 0;  // subject-wide index in recording order
  signal::Annotation annotation;
  PatchRange range;

  [[nodiscard]] std::string id() const;
};

// DataError when a unit holds fewer than memory_length patches.
[[nodiscard]] std::vector<SeizureUnit> seizure_units(const PreparedSubject& subject, double context_s,
                                                     std::size_t memory_length);

// `range` minus every range in `holes`, keeping pieces with >= min_size patches.
[[nodiscard]] std::vector<PatchRange> subtract_ranges(const PatchRange& range, const std::vector<PatchRange>& holes,
                                                      std::size_t min_size);

// Patches first..first+count-1 of every channel as [count * C, 1, W], row p * C + c.
[[nodiscard]] nn::Tensor patch_tensor(const PreparedRecording& rec, std::size_t first, std::size_t count);

}  // namespace holofuse::pipeline
