#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "holofuse/signal/recording.hpp"
#include "holofuse/signal/synth.hpp"

namespace holofuse::signal {

// One subject as described by its manifest. Group metadata is optional and
// only present for synthetic data.
struct SubjectData {
  std::string subject_id;
  std::filesystem::path manifest_path;
  std::vector<std::string> recording_paths;  // as written in the manifest
  std::vector<Recording> recordings;
  std::vector<int> channel_groups;
  int onset_group = -1;

  [[nodiscard]] std::size_t channels() const { return recordings.empty() ? 0 : recordings.front().channels; }
  [[nodiscard]] std::size_t seizure_count() const;
};

// Header-less float32 little-endian, channel-major.
void write_payload(const std::filesystem::path& path, const Recording& rec);
[[nodiscard]] std::vector<double> read_payload(const std::filesystem::path& path, std::size_t channels,
                                               std::size_t samples);

// Writes <dir>/<subject>/manifest.json and <dir>/<subject>/rec0.f32.
std::filesystem::path write_subject(const std::filesystem::path& dir, const SynthSubject& subject);

// <dir>/dataset.json pointing at <dir>/<id>/manifest.json for each id.
void write_dataset_index(const std::filesystem::path& dir, const std::vector<std::string>& subject_ids);

// Writes every subject plus <dir>/dataset.json listing the manifests.
void write_dataset(const std::filesystem::path& dir, const std::vector<SynthSubject>& subjects);

// DataError / FormatError on missing files, bad fields, size mismatches or
// channel counts that change within a subject.
[[nodiscard]] SubjectData read_subject(const std::filesystem::path& manifest_path);

// Manifest paths listed by a dataset.json (or a directory holding one); a
// single manifest yields itself. DataError when nothing is there.
[[nodiscard]] std::vector<std::filesystem::path> dataset_manifests(const std::filesystem::path& path);

// Accepts a dataset.json, a directory containing one, or a single manifest.
[[nodiscard]] std::vector<SubjectData> read_dataset(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

}  // namespace holofuse::signal
