#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "holofuse/encoder.hpp"
#include "holofuse/signal/recording.hpp"

namespace holofuse::signal {

struct PatchLayout {
  std::size_t window_samples = 0;
  std::size_t stride_samples = 0;
  std::size_t count = 0;
  double sampling_rate = 0.0;
  // 1 when at least half of the patch span is annotated ictal.
  std::vector<std::uint8_t> labels;

  [[nodiscard]] double start_s(std::size_t j) const {
    return static_cast<double>(j * stride_samples) / sampling_rate;
  }
  [[nodiscard]] double end_s(std::size_t j) const {
    return static_cast<double>(j * stride_samples + window_samples) / sampling_rate;
  }
};

// Patch count floor((t - window) / stride) + 1. Window and stride must be a
// whole number of samples; recordings shorter than one window are rejected.
[[nodiscard]] PatchLayout make_patch_layout(const Recording& rec, double window_s = 7.5, double stride_s = 1.0);

// Ictal iff the annotated overlap covers at least half of [start, end).
[[nodiscard]] bool is_ictal_span(double start_s, double end_s, std::span<const Annotation> annotations);

struct PatchSet {
  PatchLayout layout;
  // patches[channel][j]
  std::vector<std::vector<encoder::Patch>> patches;
};

[[nodiscard]] PatchSet make_patches(const Recording& rec, double window_s = 7.5, double stride_s = 1.0);

}  // namespace holofuse::signal
