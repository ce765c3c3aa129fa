#include "holofuse/signal/dataset_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "holofuse/errors.hpp"

namespace holofuse::signal {

namespace fs = std::filesystem;

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
  }
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) {
    throw DataError(where.string() + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(where.string() + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::size_t SubjectData::seizure_count() const {
  std::size_t n = 0;
  for (const Recording& r : recordings) n += r.annotations.size();
  return n;
}

void write_payload(const fs::path& path, const Recording& rec) {
  std::vector<std::uint32_t> words(rec.data.size());
  for (std::size_t i = 0; i < rec.data.size(); ++i) {
    words[i] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(rec.data[i])));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!out) {
    throw DataError("short write to " + path.string());
  }
}

std::vector<double> read_payload(const fs::path& path, std::size_t channels, std::size_t samples) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open recording payload " + path.string());
  }
  const std::size_t count = channels * samples;
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * 4) {
    throw FormatError(path.string() + ": payload has " + std::to_string(bytes) + " bytes, manifest implies " +
                      std::to_string(count * 4));
  }
  in.seekg(0);
  std::vector<std::uint32_t> words(count);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(to_le(words[i])));
    if (!std::isfinite(data[i])) {
      throw DataError(path.string() + ": non-finite sample at index " + std::to_string(i));
    }
  }
  return data;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const nlohmann::json& value) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << value.dump(2) << '\n';
  if (!out) {
    throw DataError("short write to " + path.string());
  }
}

fs::path write_subject(const fs::path& dir, const SynthSubject& subject) {
  const Recording& rec = subject.recording;
  const fs::path sub_dir = dir / rec.subject_id;
  std::error_code ec;
  fs::create_directories(sub_dir, ec);
  if (ec) {
    throw DataError("cannot create " + sub_dir.string() + ": " + ec.message());
  }
  write_payload(sub_dir / "rec0.f32", rec);
  nlohmann::json annotations = nlohmann::json::array();
  for (const Annotation& a : rec.annotations) {
    annotations.push_back({{"onset_s", a.onset_s}, {"offset_s", a.offset_s}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const SynthEvent& e : subject.events) {
    events.push_back({{"kind", to_string(e.kind)}, {"onset_s", e.onset_s}, {"offset_s", e.offset_s}, {"group", e.group}});
  }
  nlohmann::json manifest = {
      {"subject_id", rec.subject_id},
      {"recordings",
       {{{"path", "rec0.f32"},
         {"sampling_rate_hz", rec.sampling_rate},
         {"channels", rec.channels},
         {"duration_s", rec.duration_s()},
         {"annotations", annotations}}}},
      {"seizure_count", rec.annotations.size()},
      {"channel_labels", rec.channel_labels},
      {"channel_groups", subject.channel_groups},
      {"onset_group", subject.onset_group},
      {"events", events},
  };
  const fs::path manifest_path = sub_dir / "manifest.json";
  write_json_file(manifest_path, manifest);
  return manifest_path;
}

void write_dataset_index(const fs::path& dir, const std::vector<std::string>& subject_ids) {
  nlohmann::json list = nlohmann::json::array();
  for (const std::string& id : subject_ids) {
    list.push_back({{"subject_id", id}, {"manifest", id + "/manifest.json"}});
  }
  write_json_file(dir / "dataset.json", {{"subjects", list}});
}

void write_dataset(const fs::path& dir, const std::vector<SynthSubject>& subjects) {
  std::vector<std::string> ids;
  for (const SynthSubject& s : subjects) {
    write_subject(dir, s);
    ids.push_back(s.recording.subject_id);
  }
  write_dataset_index(dir, ids);
}

SubjectData read_subject(const fs::path& manifest_path) {
  const nlohmann::json m = read_json_file(manifest_path);
  SubjectData out;
  out.manifest_path = manifest_path;
  out.subject_id = field<std::string>(m, "subject_id", manifest_path);
  const auto recs = field<nlohmann::json>(m, "recordings", manifest_path);
  if (!recs.is_array() || recs.empty()) {
    throw DataError(manifest_path.string() + ": 'recordings' must be a non-empty array");
  }
  std::vector<std::string> labels;
  if (m.contains("channel_labels")) labels = field<std::vector<std::string>>(m, "channel_labels", manifest_path);
  if (m.contains("channel_groups")) out.channel_groups = field<std::vector<int>>(m, "channel_groups", manifest_path);
  if (m.contains("onset_group")) out.onset_group = field<int>(m, "onset_group", manifest_path);
  for (const nlohmann::json& r : recs) {
    Recording rec;
    rec.subject_id = out.subject_id;
    const auto rel = field<std::string>(r, "path", manifest_path);
    rec.sampling_rate = field<double>(r, "sampling_rate_hz", manifest_path);
    rec.channels = field<std::size_t>(r, "channels", manifest_path);
    const auto duration = field<double>(r, "duration_s", manifest_path);
    rec.samples = static_cast<std::size_t>(std::llround(duration * rec.sampling_rate));
    if (!out.recordings.empty() && rec.channels != out.recordings.front().channels) {
      throw DataError(manifest_path.string() + ": channel count changes within subject");
    }
    if (r.contains("annotations")) {
      for (const nlohmann::json& a : r.at("annotations")) {
        rec.annotations.push_back({field<double>(a, "onset_s", manifest_path), field<double>(a, "offset_s", manifest_path)});
      }
    }
    rec.channel_labels = labels.empty() ? default_channel_labels(rec.channels) : labels;
    rec.data = read_payload(manifest_path.parent_path() / rel, rec.channels, rec.samples);
    rec.validate();
    out.recording_paths.push_back(rel);
    out.recordings.push_back(std::move(rec));
  }
  if (!out.channel_groups.empty() && out.channel_groups.size() != out.channels()) {
    throw DataError(manifest_path.string() + ": channel_groups length differs from channel count");
  }
  return out;
}

std::vector<fs::path> dataset_manifests(const fs::path& path) {
  fs::path index = path;
  if (fs::is_directory(path)) {
    index = path / "dataset.json";
  }
  if (!fs::exists(index)) {
    throw DataError("dataset not found: " + index.string());
  }
  const nlohmann::json j = read_json_file(index);
  if (j.contains("recordings")) return {index};
  std::vector<fs::path> out;
  for (const nlohmann::json& s : field<nlohmann::json>(j, "subjects", index)) {
    out.push_back(index.parent_path() / field<std::string>(s, "manifest", index));
  }
  return out;
}

std::vector<SubjectData> read_dataset(const fs::path& path) {
  std::vector<SubjectData> out;
  for (const fs::path& m : dataset_manifests(path)) out.push_back(read_subject(m));
  return out;
}

}  // namespace holofuse::signal
