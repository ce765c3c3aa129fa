#include "holofuse/encoder.hpp"

#include "holofuse/errors.hpp"
#include "holofuse/nn/init.hpp"

namespace holofuse::encoder {

void EncoderConfig::validate() const {
  if (levels < 1) throw ConfigError("encoder: levels must be >= 1");
  if (widths.size() != levels) {
    throw ConfigError("encoder: " + std::to_string(widths.size()) + " widths given for " +
                      std::to_string(levels) + " levels");
  }
  for (std::size_t w : widths)
    if (w == 0) throw ConfigError("encoder: widths must be positive");
  if (kernel_size < 1) throw ConfigError("encoder: kernel_size must be >= 1");
  if (output_dim < 2) throw ConfigError("encoder: output_dim must be >= 2");
  if (window_samples < 1) throw ConfigError("encoder: window_samples must be >= 1");
}

Encoder::Encoder(EncoderConfig config, std::string prefix) : config_(std::move(config)), prefix_(std::move(prefix)) {
  config_.validate();
}

std::vector<std::string> Encoder::param_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < config_.levels; ++l) {
    names.push_back(prefix_ + "/conv" + std::to_string(l) + "/w");
    names.push_back(prefix_ + "/conv" + std::to_string(l) + "/b");
  }
  names.push_back(prefix_ + "/proj/w");
  names.push_back(prefix_ + "/proj/b");
  return names;
}

void Encoder::init_params(nn::ParamStore& store, Rng& rng) const {
  std::size_t in = 1;
  for (std::size_t l = 0; l < config_.levels; ++l) {
    const std::size_t out = config_.widths[l];
    const std::string base = prefix_ + "/conv" + std::to_string(l);
    store.add(base + "/w", nn::kaiming_uniform({out, in, config_.kernel_size}, in * config_.kernel_size, rng));
    store.add(base + "/b", nn::Tensor({out}));
    in = out;
  }
  store.add(prefix_ + "/proj/w", nn::kaiming_uniform({config_.output_dim, in}, in, rng));
  store.add(prefix_ + "/proj/b", nn::Tensor({config_.output_dim}));
}

nn::Var Encoder::forward(nn::Graph& graph, nn::ParamStore& store, nn::Var patches) const {
  const auto& shape = patches.shape();
  if (shape.size() != 3 || shape[1] != 1 || shape[2] != config_.window_samples) {
    throw ShapeError("encoder: expected patches [N, 1, " + std::to_string(config_.window_samples) + "], got " +
                     nn::shape_string(shape));
  }
  nn::Var x = patches;
  for (std::size_t l = 0; l < config_.levels; ++l) {
    const std::string base = prefix_ + "/conv" + std::to_string(l);
    x = nn::conv1d_causal(x, graph.parameter(store, base + "/w"), graph.parameter(store, base + "/b"), 1);
    x = nn::leaky_relu(x, config_.leaky_slope);
    x = nn::downsample2(x);
  }
  x = nn::mean_last(x);
  return nn::linear(x, graph.parameter(store, prefix_ + "/proj/w"), graph.parameter(store, prefix_ + "/proj/b"));
}

FeatureVector Encoder::encode(const Patch& patch, nn::ParamStore& store) const {
  if (patch.samples.size() != config_.window_samples) {
    throw ShapeError("encoder: patch has " + std::to_string(patch.samples.size()) + " samples, expected " +
                     std::to_string(config_.window_samples));
  }
  nn::Graph graph;
  nn::Var in = graph.constant(nn::Tensor({1, 1, patch.samples.size()}, patch.samples));
  nn::Var out = forward(graph, store, in);
  const auto values = out.value().data();
  return FeatureVector{{values.begin(), values.end()}, patch.channel_index, patch.patch_index};
}

std::vector<FeatureVector> Encoder::encode_all(std::span<const Patch> patches, nn::ParamStore& store) const {
  if (patches.empty()) return {};
  const std::size_t j = patches.front().patch_index;
  const std::size_t w = config_.window_samples;
  std::vector<double> stacked;
  stacked.reserve(patches.size() * w);
  for (const Patch& p : patches) {
    if (p.patch_index != j) throw DataError("encode_all: patches mix patch indices");
    if (p.samples.size() != w) {
      throw ShapeError("encoder: patch has " + std::to_string(p.samples.size()) + " samples, expected " +
                       std::to_string(w));
    }
    stacked.insert(stacked.end(), p.samples.begin(), p.samples.end());
  }
  nn::Graph graph;
  nn::Var in = graph.constant(nn::Tensor({patches.size(), 1, w}, std::move(stacked)));
  const nn::Tensor& out = forward(graph, store, in).value();
  const std::size_t d = config_.output_dim;
  std::vector<FeatureVector> result;
  result.reserve(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto row = out.data().subspan(i * d, d);
    result.push_back(FeatureVector{{row.begin(), row.end()}, patches[i].channel_index, j});
  }
  return result;
}

}  // namespace holofuse::encoder
