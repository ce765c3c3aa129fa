#pragma once

// Long-term temporal aggregation. M consecutive fused vectors form a memory
// stack; a dilated causal TCN reads the stack and its last time step is
// mapped to a seizure logit.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "holofuse/fusion.hpp"
#include "holofuse/nn/graph.hpp"
#include "holofuse/nn/param_store.hpp"
#include "holofuse/random.hpp"

namespace holofuse::memory {

struct MemoryStack {
  std::vector<fusion::FusedVector> vectors;
  std::size_t end_patch_index = 0;
  double effective_context_seconds = 0.0;
};

struct TcnConfig {
  std::size_t blocks = 3;
  std::size_t kernel_size = 3;
  std::vector<std::size_t> dilations = {1, 2, 4};
  std::size_t hidden = 64;
  double leaky_slope = 0.01;

  // 1 + (kernel_size - 1) * sum(dilations).
  [[nodiscard]] std::size_t receptive_field() const;
  // Structural checks plus receptive_field() >= memory_length.
  void validate(std::size_t memory_length) const;
};

// One stack per end index M-1 .. n-1 (stride one patch).
[[nodiscard]] std::vector<MemoryStack> slide_stacks(std::span<const fusion::FusedVector> sequence,
                                                    std::size_t memory_length, double window_seconds);

class Tcn {
 public:
  Tcn(TcnConfig config, std::size_t input_dim, std::string prefix = "tcn");

  [[nodiscard]] const TcnConfig& config() const noexcept { return config_; }
  void init_params(nn::ParamStore& store, Rng& rng) const;
  [[nodiscard]] std::vector<std::string> param_names() const;

  // stacks [S, input_dim, M] -> logits [S, 1]. No receptive-field check.
  [[nodiscard]] nn::Var logits(nn::Graph& graph, nn::ParamStore& store, nn::Var stacks) const;

  // Probability for one stack; validates length and receptive field.
  [[nodiscard]] double classify(const MemoryStack& stack, std::size_t memory_length, nn::ParamStore& store) const;

 private:
  TcnConfig config_;
  std::size_t input_dim_;
  std::string prefix_;
};

// Two-layer perceptron on a single fused vector; replaces the TCN when the
// memory is ablated.
class MlpHead {
 public:
  MlpHead(std::size_t input_dim, std::size_t hidden = 64, double leaky_slope = 0.01, std::string prefix = "mlp");

  void init_params(nn::ParamStore& store, Rng& rng) const;
  [[nodiscard]] std::vector<std::string> param_names() const;
  // vectors [S, input_dim] -> logits [S, 1].
  [[nodiscard]] nn::Var logits(nn::Graph& graph, nn::ParamStore& store, nn::Var vectors) const;

 private:
  std::size_t input_dim_;
  std::size_t hidden_;
  double leaky_slope_;
  std::string prefix_;
};

// fused [J, d] -> [S, d, M] where stack s covers rows ends[s]-M+1 .. ends[s].
[[nodiscard]] nn::Var gather_windows(nn::Var fused, std::span<const std::size_t> ends, std::size_t memory_length);
// fused [J, d] -> [S, d], row s = fused[rows[s]].
[[nodiscard]] nn::Var gather_rows(nn::Var fused, std::span<const std::size_t> rows);

}  // namespace holofuse::memory
