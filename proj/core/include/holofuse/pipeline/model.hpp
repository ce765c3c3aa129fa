#pragma once

#include <span>
#include <string>
#include <vector>

#include "holofuse/encoder.hpp"
#include "holofuse/fusion.hpp"
#include "holofuse/memory.hpp"
#include "holofuse/nn/graph.hpp"
#include "holofuse/nn/param_store.hpp"
#include "holofuse/pipeline/config.hpp"
#include "holofuse/vsa.hpp"

namespace holofuse::pipeline {

// Encoder -> fusion (HRR with per-subject keys, or channel mean) -> head
// (TCN over memory stacks, or MLP on the last fused vector). The parameter
// layout does not depend on the channel count except for the key vectors,
// which live under "keys/<subject>".
class CaModel {
 public:
  explicit CaModel(ModelConfig config);

  [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
  [[nodiscard]] nn::ParamStore& params() noexcept { return store_; }
  [[nodiscard]] const nn::ParamStore& params() const noexcept { return store_; }
  [[nodiscard]] const vsa::UnitaryBasis& basis() const noexcept { return basis_; }

  // Encoder and head weights; keys are added per subject.
  void init(Rng& rng);
  [[nodiscard]] static std::string key_name(const std::string& subject_id) { return "keys/" + subject_id; }
  // Fresh init_key_map keys for the subject, replacing any existing ones.
  void add_subject(const std::string& subject_id, std::size_t channels);
  [[nodiscard]] bool has_subject(const std::string& subject_id) const;
  [[nodiscard]] std::vector<std::string> subjects() const;
  [[nodiscard]] fusion::ChannelKeyMap key_map(const std::string& subject_id) const;
  // Drops every key vector except the listed subjects'.
  void keep_subjects(std::span<const std::string> subject_ids);

  // patches [P * C, 1, W] -> fused [P, d].
  [[nodiscard]] nn::Var fused(nn::Graph& graph, const nn::Tensor& patches, std::size_t channels,
                              const std::string& subject_id);
  // Logits [S, 1] for stacks ending at rows `ends` (each >= M - 1) of the fused sequence.
  [[nodiscard]] nn::Var logits(nn::Graph& graph, const nn::Tensor& patches, std::size_t channels,
                               std::span<const std::size_t> ends, const std::string& subject_id);

  // ShapeError if `other` disagrees on d or patch length.
  void require_compatible(const ModelConfig& other) const;

 private:
  ModelConfig config_;
  encoder::Encoder encoder_;
  memory::Tcn tcn_;
  memory::MlpHead mlp_;
  vsa::UnitaryBasis basis_;
  nn::ParamStore store_;
};

}  // namespace holofuse::pipeline
