#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "holofuse/nn/param_store.hpp"
#include "holofuse/nn/tensor.hpp"

namespace holofuse::nn {

class Graph;

// Handle to a value recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] const Shape& shape() const { return value().shape(); }
  [[nodiscard]] bool requires_grad() const;
};

// Reverse-mode tape over tensor-valued operations. Nodes are appended in
// evaluation order, so walking them backwards is a valid topological order.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& output_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a stored parameter; backward() accumulates into its grad.
  Var parameter(ParamStore& store, const std::string& name);

  // Records an op output. `backward` runs only when some input requires grad.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  [[nodiscard]] const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  // Gradient accumulator of a node, allocated on first use.
  Tensor& grad(std::size_t id);

  // Propagates d(loss)/d(node) for a scalar loss. One call per recorded forward.
  void backward(Var loss);

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Param* param = nullptr;
  };

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// ---- ops ------------------------------------------------------------------

// Causal dilated 1-D convolution over [batch, channels_in, length]:
//   out[n, o, t] = bias[o] + sum_{c,k} w[o, c, k] * x[n, c, t - k * dilation],
// with x taken as zero for negative time. Output length equals input length.
[[nodiscard]] Var conv1d_causal(Var x, Var weights, std::optional<Var> bias, std::size_t dilation);

[[nodiscard]] Var leaky_relu(Var x, double slope);

// Keeps even time indices of [batch, channels, length]; length -> ceil(length / 2).
[[nodiscard]] Var downsample2(Var x);

// Mean over the last axis of [batch, channels, length] -> [batch, channels].
[[nodiscard]] Var mean_last(Var x);

// Last time step of [batch, channels, length] -> [batch, channels].
[[nodiscard]] Var last_step(Var x);

// [batch, in] x [out, in]^T (+ bias[out]) -> [batch, out].
[[nodiscard]] Var linear(Var x, Var weights, std::optional<Var> bias);

[[nodiscard]] Var add(Var a, Var b);
[[nodiscard]] Var scale(Var x, double factor);
[[nodiscard]] Var reshape(Var x, Shape shape);

// Sum of squares of all elements -> scalar.
[[nodiscard]] Var sum_squares(Var x);

// Mean of weights[s] * BCE(sigmoid(logits[s]), labels[s]) -> scalar.
[[nodiscard]] Var weighted_bce_with_logits(Var logits, std::vector<double> labels,
                                           std::vector<double> weights);

[[nodiscard]] double sigmoid(double x) noexcept;

}  // namespace holofuse::nn
