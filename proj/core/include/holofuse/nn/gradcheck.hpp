#pragma once

#include <functional>
#include <string>
#include <vector>

#include "holofuse/nn/graph.hpp"
#include "holofuse/nn/param_store.hpp"

namespace holofuse::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
  // Names to check; empty means every parameter in the store.
  std::vector<std::string> names;
  // Upper bound on checked entries per parameter (evenly strided); 0 = all.
  std::size_t max_entries_per_param = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Builds a scalar loss on a fresh graph from the current parameter values.
using LossBuilder = std::function<Var(Graph&, ParamStore&)>;

// Compares reverse-mode gradients with central differences. Parameter
// values are restored on return.
[[nodiscard]] GradCheckResult check_gradients(ParamStore& store, const LossBuilder& loss,
                                              const GradCheckOptions& options = {});

}  // namespace holofuse::nn
