#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "holofuse/encoder.hpp"
#include "holofuse/memory.hpp"

namespace holofuse::pipeline {

enum class Scheme { looc, laboc };
enum class FusionMode { hrr, mean };
enum class HeadMode { tcn, mlp };
enum class Variant { full, no_pretrain, mean_fusion, no_memory };

[[nodiscard]] std::string to_string(Scheme s);
[[nodiscard]] std::string to_string(FusionMode m);
[[nodiscard]] std::string to_string(HeadMode m);
[[nodiscard]] std::string to_string(Variant v);
// ConfigError on unknown names.
[[nodiscard]] Scheme parse_scheme(std::string_view s);
[[nodiscard]] Variant parse_variant(std::string_view s);

struct PreprocessConfig {
  double target_rate_hz = 512.0;
  double band_low_hz = 0.5;
  double band_high_hz = 120.0;
  std::size_t filter_order = 4;
  bool robust_scale = true;
};

struct ModelConfig {
  encoder::EncoderConfig encoder;
  memory::TcnConfig tcn;
  std::size_t mlp_hidden = 64;
  FusionMode fusion = FusionMode::hrr;
  HeadMode head = HeadMode::tcn;
  std::uint64_t basis_seed = 1;
  std::size_t memory_length = 14;

  [[nodiscard]] std::size_t dim() const noexcept { return encoder.output_dim; }
  void validate() const;
};

[[nodiscard]] nlohmann::json to_json(const ModelConfig& c);
[[nodiscard]] ModelConfig model_config_from_json(const nlohmann::json& j);

struct TrainConfig {
  double learning_rate = 5.5e-4;
  // Fusion keys get their own rate (lr_scale = key_learning_rate / learning_rate).
  double key_learning_rate = 0.1;
  double window_s = 7.5;
  double stride_s = 1.0;
  std::size_t batch_size = 32;
  // A batch is this many runs of consecutive memory stacks.
  std::size_t segments_per_batch = 4;
  std::size_t batches_per_epoch = 50;
  std::size_t pretrain_min_epochs = 25;
  std::size_t pretrain_max_epochs = 50;
  std::size_t plateau_window = 5;
  double plateau_min_delta = 0.005;
  std::size_t finetune_max_epochs = 10;
  // Fine-tuning runs at most pretrain_epochs / finetune_epoch_ratio epochs.
  std::size_t finetune_epoch_ratio = 5;
  std::size_t finetune_batches_per_epoch = 20;
  Scheme scheme = Scheme::looc;
  bool freeze_all_but_fusion = false;
  // Context kept on each side of a seizure for training and evaluation units.
  double train_context_s = 180.0;
  double eval_context_s = 180.0;
  std::uint64_t seed = 0;

  void validate() const;
};

[[nodiscard]] nlohmann::json to_json(const TrainConfig& c);
[[nodiscard]] TrainConfig train_config_from_json(const nlohmann::json& j);

// Context lengths of the paper's two dataset styles.
inline constexpr double kShortTermContextS = 180.0;
inline constexpr double kLongTermContextS = 3600.0;

// Everything one CLI invocation needs, parsed from a flat `key = value` file
// (`#` starts a comment) with flag overrides applied on top.
struct RunConfig {
  std::string dataset;
  std::string out;
  std::string checkpoint;
  std::uint64_t seed = 0;
  PreprocessConfig preprocess;
  ModelConfig model;
  TrainConfig train;
  std::vector<std::string> test_subjects;
  // 0 means every non-test subject.
  std::size_t pool_size = 0;
  std::vector<std::size_t> scaling_pool_sizes = {5, 10, 15};

  // Fills derived fields (encoder window length, training seed) and validates.
  void resolve();
};

// Throws ConfigError naming the key (and line, for text) on unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
[[nodiscard]] RunConfig parse_config_text(std::string_view text, RunConfig base = {});
[[nodiscard]] RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});
// Canonical text form; parse_config_text(to_config_text(c)) == c.
[[nodiscard]] std::string to_config_text(const RunConfig& config);
[[nodiscard]] std::vector<std::string> config_keys();

}  // namespace holofuse::pipeline
