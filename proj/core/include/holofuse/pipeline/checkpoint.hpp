#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "holofuse/pipeline/config.hpp"
#include "holofuse/pipeline/model.hpp"

namespace holofuse::pipeline {

struct TrainLog {
  std::vector<double> epoch_f1;
  std::vector<double> epoch_loss;

  [[nodiscard]] std::size_t epochs() const noexcept { return epoch_f1.size(); }
};

struct Checkpoint {
  CaModel model;
  TrainConfig train;
  TrainLog log;
  // Pretraining pool, fine-tuning assignment and the like.
  nlohmann::json meta = nlohmann::json::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "HOLOFUSE" | u32 version | u64 header length | JSON header |
// float64 little-endian blobs. The header holds the configs, training log,
// meta and a name -> {offset, shape, step, lr_scale, frozen} index covering
// each parameter's value and Adam moments.
[[nodiscard]] std::vector<char> serialize_checkpoint(const Checkpoint& ckpt);
// FormatError on bad magic, unknown version, truncation or inconsistent index.
[[nodiscard]] Checkpoint deserialize_checkpoint(const std::vector<char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace holofuse::pipeline
