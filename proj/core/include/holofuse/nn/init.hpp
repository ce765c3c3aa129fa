#pragma once

#include "holofuse/nn/tensor.hpp"
#include "holofuse/random.hpp"

namespace holofuse::nn {

// Uniform(-b, b) with b = sqrt(6 / fan_in): Kaiming scaling for rectifiers.
[[nodiscard]] inline Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& x : t.data()) x = bound * (2.0 * uniform01(rng) - 1.0);
  return t;
}

}  // namespace holofuse::nn
