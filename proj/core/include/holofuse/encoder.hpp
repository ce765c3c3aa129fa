#pragma once

// Per-channel short-term feature extraction. Every channel patch is mapped to
// a feature vector of length output_dim on its own, so the encoder never sees
// how many channels a recording has.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "holofuse/nn/graph.hpp"
#include "holofuse/nn/param_store.hpp"
#include "holofuse/random.hpp"

namespace holofuse::encoder {

struct EncoderConfig {
  std::size_t levels = 4;
  std::size_t kernel_size = 3;
  std::vector<std::size_t> widths = {8, 16, 32, 64};
  std::size_t output_dim = 128;
  // Expected patch length W in samples (7.5 s at 512 Hz by default).
  std::size_t window_samples = 3840;
  double leaky_slope = 0.01;

  void validate() const;
};

struct Patch {
  std::size_t channel_index = 0;
  std::size_t patch_index = 0;
  std::vector<double> samples;
  double window_seconds = 7.5;
  double stride_seconds = 1.0;
};

struct FeatureVector {
  std::vector<double> values;
  std::size_t channel_index = 0;
  std::size_t patch_index = 0;
};

// Reference encoder: `levels` stages of causal conv -> leaky ReLU -> stride-2
// decimation, then global average pooling and a linear map to output_dim.
class Encoder {
 public:
  explicit Encoder(EncoderConfig config, std::string prefix = "encoder");

  [[nodiscard]] const EncoderConfig& config() const noexcept { return config_; }

  void init_params(nn::ParamStore& store, Rng& rng) const;
  [[nodiscard]] std::vector<std::string> param_names() const;

  // [N, 1, W] -> [N, output_dim].
  [[nodiscard]] nn::Var forward(nn::Graph& graph, nn::ParamStore& store, nn::Var patches) const;

  [[nodiscard]] FeatureVector encode(const Patch& patch, nn::ParamStore& store) const;
  // All patches must share a patch index; output order follows input order.
  [[nodiscard]] std::vector<FeatureVector> encode_all(std::span<const Patch> patches,
                                                      nn::ParamStore& store) const;

 private:
  EncoderConfig config_;
  std::string prefix_;
};

}  // namespace holofuse::encoder
