#include "holofuse/memory.hpp"

#include <numeric>

#include "holofuse/errors.hpp"
#include "holofuse/nn/init.hpp"

namespace holofuse::memory {

using nn::Graph;
using nn::Tensor;
using nn::Var;

std::size_t TcnConfig::receptive_field() const {
  const std::size_t dsum = std::accumulate(dilations.begin(), dilations.end(), std::size_t{0});
  return 1 + (kernel_size - 1) * dsum;
}

void TcnConfig::validate(std::size_t memory_length) const {
  if (blocks < 1) throw ConfigError("tcn: blocks must be >= 1");
  if (dilations.size() != blocks) {
    throw ConfigError("tcn: " + std::to_string(dilations.size()) + " dilations given for " + std::to_string(blocks) +
                      " blocks");
  }
  for (std::size_t d : dilations)
    if (d == 0) throw ConfigError("tcn: dilations must be positive");
  if (kernel_size < 1) throw ConfigError("tcn: kernel_size must be >= 1");
  if (hidden < 1) throw ConfigError("tcn: hidden width must be >= 1");
  if (receptive_field() < memory_length) {
    throw ConfigError("tcn: receptive field " + std::to_string(receptive_field()) + " is shorter than memory length " +
                      std::to_string(memory_length));
  }
}

std::vector<MemoryStack> slide_stacks(std::span<const fusion::FusedVector> sequence, std::size_t memory_length,
                                      double window_seconds) {
  if (memory_length == 0) throw ConfigError("slide_stacks: memory length must be positive");
  if (sequence.size() < memory_length) {
    throw DataError("slide_stacks: " + std::to_string(sequence.size()) + " fused vectors, need at least " +
                    std::to_string(memory_length));
  }
  std::vector<MemoryStack> stacks;
  stacks.reserve(sequence.size() - memory_length + 1);
  for (std::size_t end = memory_length - 1; end < sequence.size(); ++end) {
    MemoryStack s;
    s.vectors.assign(sequence.begin() + static_cast<std::ptrdiff_t>(end + 1 - memory_length),
                     sequence.begin() + static_cast<std::ptrdiff_t>(end + 1));
    for (std::size_t i = 1; i < s.vectors.size(); ++i) {
      if (s.vectors[i].patch_index != s.vectors[i - 1].patch_index + 1) {
        throw DataError("slide_stacks: fused vectors are not consecutive patches");
      }
    }
    s.end_patch_index = s.vectors.back().patch_index;
    s.effective_context_seconds = window_seconds * static_cast<double>(memory_length);
    stacks.push_back(std::move(s));
  }
  return stacks;
}

Tcn::Tcn(TcnConfig config, std::size_t input_dim, std::string prefix)
    : config_(std::move(config)), input_dim_(input_dim), prefix_(std::move(prefix)) {
  if (config_.dilations.size() != config_.blocks) {
    throw ConfigError("tcn: " + std::to_string(config_.dilations.size()) + " dilations given for " +
                      std::to_string(config_.blocks) + " blocks");
  }
}

std::vector<std::string> Tcn::param_names() const {
  std::vector<std::string> names;
  std::size_t in = input_dim_;
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::string base = prefix_ + "/block" + std::to_string(b);
    names.push_back(base + "/w");
    names.push_back(base + "/b");
    if (in != config_.hidden) names.push_back(base + "/skip");
    in = config_.hidden;
  }
  names.push_back(prefix_ + "/out/w");
  names.push_back(prefix_ + "/out/b");
  return names;
}

void Tcn::init_params(nn::ParamStore& store, Rng& rng) const {
  std::size_t in = input_dim_;
  const std::size_t k = config_.kernel_size;
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::string base = prefix_ + "/block" + std::to_string(b);
    store.add(base + "/w", nn::kaiming_uniform({config_.hidden, in, k}, in * k, rng));
    store.add(base + "/b", Tensor({config_.hidden}));
    if (in != config_.hidden) store.add(base + "/skip", nn::kaiming_uniform({config_.hidden, in, 1}, in, rng));
    in = config_.hidden;
  }
  store.add(prefix_ + "/out/w", nn::kaiming_uniform({1, config_.hidden}, config_.hidden, rng));
  store.add(prefix_ + "/out/b", Tensor({1}));
}

Var Tcn::logits(Graph& graph, nn::ParamStore& store, Var stacks) const {
  const auto& shape = stacks.shape();
  if (shape.size() != 3 || shape[1] != input_dim_) {
    throw ShapeError("tcn: expected stacks [S, " + std::to_string(input_dim_) + ", M], got " + nn::shape_string(shape));
  }
  Var x = stacks;
  std::size_t in = input_dim_;
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::string base = prefix_ + "/block" + std::to_string(b);
    Var h = nn::conv1d_causal(x, graph.parameter(store, base + "/w"), graph.parameter(store, base + "/b"),
                              config_.dilations[b]);
    h = nn::leaky_relu(h, config_.leaky_slope);
    Var skip = in == config_.hidden ? x : nn::conv1d_causal(x, graph.parameter(store, base + "/skip"), std::nullopt, 1);
    x = nn::add(h, skip);
    in = config_.hidden;
  }
  Var last = nn::last_step(x);
  return nn::linear(last, graph.parameter(store, prefix_ + "/out/w"), graph.parameter(store, prefix_ + "/out/b"));
}

double Tcn::classify(const MemoryStack& stack, std::size_t memory_length, nn::ParamStore& store) const {
  config_.validate(memory_length);
  if (stack.vectors.size() != memory_length) {
    throw ShapeError("classify: stack holds " + std::to_string(stack.vectors.size()) + " vectors, expected " +
                     std::to_string(memory_length));
  }
  Tensor in({1, input_dim_, memory_length});
  for (std::size_t t = 0; t < memory_length; ++t) {
    const auto& v = stack.vectors[t].values;
    if (v.size() != input_dim_) throw ShapeError("classify: fused vector has wrong dimension");
    for (std::size_t c = 0; c < input_dim_; ++c) in[c * memory_length + t] = v[c];
  }
  Graph graph;
  Var z = logits(graph, store, graph.constant(std::move(in)));
  return nn::sigmoid(z.value()[0]);
}

MlpHead::MlpHead(std::size_t input_dim, std::size_t hidden, double leaky_slope, std::string prefix)
    : input_dim_(input_dim), hidden_(hidden), leaky_slope_(leaky_slope), prefix_(std::move(prefix)) {}

std::vector<std::string> MlpHead::param_names() const {
  return {prefix_ + "/hidden/w", prefix_ + "/hidden/b", prefix_ + "/out/w", prefix_ + "/out/b"};
}

void MlpHead::init_params(nn::ParamStore& store, Rng& rng) const {
  store.add(prefix_ + "/hidden/w", nn::kaiming_uniform({hidden_, input_dim_}, input_dim_, rng));
  store.add(prefix_ + "/hidden/b", Tensor({hidden_}));
  store.add(prefix_ + "/out/w", nn::kaiming_uniform({1, hidden_}, hidden_, rng));
  store.add(prefix_ + "/out/b", Tensor({1}));
}

Var MlpHead::logits(Graph& graph, nn::ParamStore& store, Var vectors) const {
  Var h = nn::linear(vectors, graph.parameter(store, prefix_ + "/hidden/w"),
                     graph.parameter(store, prefix_ + "/hidden/b"));
  h = nn::leaky_relu(h, leaky_slope_);
  return nn::linear(h, graph.parameter(store, prefix_ + "/out/w"), graph.parameter(store, prefix_ + "/out/b"));
}

Var gather_windows(Var fused, std::span<const std::size_t> ends, std::size_t memory_length) {
  const auto& shape = fused.shape();
  if (shape.size() != 2) throw ShapeError("gather_windows: fused must be [J, d]");
  const std::size_t rows = shape[0], d = shape[1];
  for (std::size_t e : ends) {
    if (e >= rows || e + 1 < memory_length) {
      throw ShapeError("gather_windows: window ending at " + std::to_string(e) + " does not fit " +
                       std::to_string(rows) + " rows");
    }
  }
  const std::size_t m = memory_length;
  Tensor out({ends.size(), d, m});
  const Tensor& fv = fused.value();
  for (std::size_t s = 0; s < ends.size(); ++s) {
    const std::size_t first = ends[s] + 1 - m;
    for (std::size_t t = 0; t < m; ++t)
      for (std::size_t c = 0; c < d; ++c) out[(s * d + c) * m + t] = fv[(first + t) * d + c];
  }
  std::vector<std::size_t> ends_copy(ends.begin(), ends.end());
  return fused.graph->record(std::move(out), {fused},
                             [fused, ends_copy = std::move(ends_copy), d, m](Graph& g, const Tensor& gout) {
                               Tensor& gf = g.grad(fused.id);
                               for (std::size_t s = 0; s < ends_copy.size(); ++s) {
                                 const std::size_t first = ends_copy[s] + 1 - m;
                                 for (std::size_t t = 0; t < m; ++t)
                                   for (std::size_t c = 0; c < d; ++c) gf[(first + t) * d + c] += gout[(s * d + c) * m + t];
                               }
                             });
}

Var gather_rows(Var fused, std::span<const std::size_t> rows) {
  const auto& shape = fused.shape();
  if (shape.size() != 2) throw ShapeError("gather_rows: fused must be [J, d]");
  const std::size_t d = shape[1];
  Tensor out({rows.size(), d});
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s] >= shape[0]) throw ShapeError("gather_rows: row index out of range");
    for (std::size_t c = 0; c < d; ++c) out[s * d + c] = fused.value()[rows[s] * d + c];
  }
  std::vector<std::size_t> rows_copy(rows.begin(), rows.end());
  return fused.graph->record(std::move(out), {fused}, [fused, rows_copy = std::move(rows_copy), d](Graph& g, const Tensor& gout) {
    Tensor& gf = g.grad(fused.id);
    for (std::size_t s = 0; s < rows_copy.size(); ++s)
      for (std::size_t c = 0; c < d; ++c) gf[rows_copy[s] * d + c] += gout[s * d + c];
  });
}

}  // namespace holofuse::memory
