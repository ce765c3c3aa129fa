#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "holofuse/nn/gradcheck.hpp"

namespace holofuse::pipeline {

// Finite-difference check of the full model loss (encoder -> HRR fusion ->
// TCN -> weighted BCE) on a toy two-subject setup.
struct ModelGradCheckOptions {
  std::uint64_t seed = 1;
  std::size_t dim = 32;
  std::vector<std::size_t> channels = {3, 5};
  double step = 1e-5;
  // 0 checks every entry.
  std::size_t max_entries_per_param = 0;
};

struct ModelGradCheckRow {
  std::string group;  // "encoder", "tcn" or "keys"
  nn::GradCheckResult result;
};

[[nodiscard]] std::vector<ModelGradCheckRow> model_gradcheck(const ModelGradCheckOptions& options = {});

}  // namespace holofuse::pipeline
