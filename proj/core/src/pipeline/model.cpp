#include "holofuse/pipeline/model.hpp"

#include <algorithm>

#include "holofuse/errors.hpp"

namespace holofuse::pipeline {

CaModel::CaModel(ModelConfig config)
    : config_((config.validate(), std::move(config))),
      encoder_(config_.encoder),
      tcn_(config_.tcn, config_.dim()),
      mlp_(config_.dim(), config_.mlp_hidden, config_.tcn.leaky_slope),
      basis_(vsa::UnitaryBasis::sample(config_.dim(), config_.basis_seed)) {}

void CaModel::init(Rng& rng) {
  encoder_.init_params(store_, rng);
  if (config_.head == HeadMode::tcn) {
    tcn_.init_params(store_, rng);
  } else {
    mlp_.init_params(store_, rng);
  }
}

void CaModel::add_subject(const std::string& subject_id, std::size_t channels) {
  if (channels == 0) throw ShapeError("subject '" + subject_id + "' has no channels");
  const fusion::ChannelKeyMap map = fusion::init_key_map(subject_id, channels);
  const std::string name = key_name(subject_id);
  store_.erase(name);
  nn::Tensor raw({channels});
  std::copy(map.raw.begin(), map.raw.end(), raw.data().begin());
  store_.add(name, std::move(raw));
}

bool CaModel::has_subject(const std::string& subject_id) const { return store_.contains(key_name(subject_id)); }

std::vector<std::string> CaModel::subjects() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : store_) {
    if (name.rfind("keys/", 0) == 0) out.push_back(name.substr(5));
  }
  return out;
}

fusion::ChannelKeyMap CaModel::key_map(const std::string& subject_id) const {
  if (!has_subject(subject_id)) throw ConfigError("no fusion keys for subject '" + subject_id + "'");
  const auto& v = store_.at(key_name(subject_id)).value;
  return {subject_id, std::vector<double>(v.data().begin(), v.data().end())};
}

void CaModel::keep_subjects(std::span<const std::string> subject_ids) {
  for (const std::string& s : subjects()) {
    if (std::find(subject_ids.begin(), subject_ids.end(), s) == subject_ids.end()) store_.erase(key_name(s));
  }
}

nn::Var CaModel::fused(nn::Graph& graph, const nn::Tensor& patches, std::size_t channels,
                       const std::string& subject_id) {
  const nn::Shape& shape = patches.shape();
  if (shape.size() != 3 || shape[1] != 1 || shape[2] != config_.encoder.window_samples || channels == 0 ||
      shape[0] % channels != 0) {
    throw ShapeError("patch tensor " + nn::shape_string(shape) + " does not fit C = " + std::to_string(channels) +
                     ", W = " + std::to_string(config_.encoder.window_samples));
  }
  const std::size_t P = shape[0] / channels;
  const nn::Var features = encoder_.forward(graph, store_, graph.constant(patches));
  const nn::Var grouped = nn::reshape(features, {P, channels, config_.dim()});
  if (config_.fusion == FusionMode::mean) {
    return fusion::fuse_channel_mean(grouped);
  }
  const std::string name = key_name(subject_id);
  if (!store_.contains(name)) throw ConfigError("no fusion keys for subject '" + subject_id + "'");
  if (store_.at(name).value.size() != channels) {
    throw ShapeError("subject '" + subject_id + "' has " + std::to_string(store_.at(name).value.size()) +
                     " keys but the data has " + std::to_string(channels) + " channels");
  }
  // Divided by C so the fused scale does not grow with the channel count and
  // matches the channel-mean ablation.
  return nn::scale(fusion::fuse_hrr(grouped, graph.parameter(store_, name), basis_),
                   1.0 / static_cast<double>(channels));
}

nn::Var CaModel::logits(nn::Graph& graph, const nn::Tensor& patches, std::size_t channels,
                        std::span<const std::size_t> ends, const std::string& subject_id) {
  const nn::Var f = fused(graph, patches, channels, subject_id);
  if (config_.head == HeadMode::mlp) {
    return mlp_.logits(graph, store_, memory::gather_rows(f, ends));
  }
  return tcn_.logits(graph, store_, memory::gather_windows(f, ends, config_.memory_length));
}

void CaModel::require_compatible(const ModelConfig& other) const {
  if (other.dim() != config_.dim()) {
    throw ShapeError("dimension mismatch: checkpoint d = " + std::to_string(config_.dim()) + ", requested d = " +
                     std::to_string(other.dim()));
  }
  if (other.encoder.window_samples != config_.encoder.window_samples) {
    throw ShapeError("patch length mismatch: checkpoint W = " + std::to_string(config_.encoder.window_samples) +
                     ", requested W = " + std::to_string(other.encoder.window_samples));
  }
}

}  // namespace holofuse::pipeline
