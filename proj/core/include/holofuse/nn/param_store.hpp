#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "holofuse/nn/tensor.hpp"

namespace holofuse::nn {

struct Param {
  Tensor value;
  Tensor grad;
  // Adam first and second moments.
  Tensor m;
  Tensor v;
  std::int64_t step = 0;
  double lr_scale = 1.0;
  bool frozen = false;
  // Set when a backward pass wrote into `grad` since the last zero_grad().
  bool touched = false;
};

// Named trainable tensors. Iteration order is lexicographic in the name so
// that serialization and updates are deterministic.
class ParamStore {
 public:
  Param& add(const std::string& name, Tensor init);
  [[nodiscard]] bool contains(const std::string& name) const { return params_.count(name) != 0; }
  [[nodiscard]] Param& at(const std::string& name);
  [[nodiscard]] const Param& at(const std::string& name) const;
  void erase(const std::string& name) { params_.erase(name); }

  void zero_grad();
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] std::vector<std::string> names() const;

  [[nodiscard]] auto begin() { return params_.begin(); }
  [[nodiscard]] auto end() { return params_.end(); }
  [[nodiscard]] auto begin() const { return params_.begin(); }
  [[nodiscard]] auto end() const { return params_.end(); }
  [[nodiscard]] std::size_t size() const noexcept { return params_.size(); }

 private:
  std::map<std::string, Param> params_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam on every touched, unfrozen parameter, with per-parameter
// step counters. Throws NumericError before modifying anything if a gradient
// is not finite.
void adam_step(ParamStore& store, double learning_rate, const AdamOptions& options = {});

}  // namespace holofuse::nn
