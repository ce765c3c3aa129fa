#pragma once

// Learnable holographic fusion of per-channel features.
//
// Channel i gets the key rot(v, r_i) with r_i = m_i - 1 and m_i = 1 + sigmoid(u_i),
// so m_i stays strictly inside (1, 2). The fused vector of one patch is
//   f = sum_i p_i (*) rot(v, r_i)
// where (*) is circular convolution. The sum is evaluated in the Fourier
// domain: F(f) = sum_i F(p_i) . e^{i theta r_i}.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "holofuse/encoder.hpp"
#include "holofuse/nn/graph.hpp"
#include "holofuse/vsa.hpp"

namespace holofuse::fusion {

struct ChannelKeyMap {
  std::string subject_id;
  // Unconstrained parameters u, one per channel.
  std::vector<double> raw;

  [[nodiscard]] std::size_t channels() const noexcept { return raw.size(); }
  // m_i = 1 + sigmoid(u_i), in (1, 2).
  [[nodiscard]] std::vector<double> mapped() const;
  // r_i = m_i - 1, in (0, 1).
  [[nodiscard]] std::vector<double> angles() const;
};

// Mapped values evenly spaced over [1.25, 1.75] in channel order; a single
// channel sits at 1.5.
[[nodiscard]] ChannelKeyMap init_key_map(std::string subject_id, std::size_t channels);

struct FusedVector {
  std::vector<double> values;
  std::size_t patch_index = 0;
};

[[nodiscard]] FusedVector fuse(std::span<const encoder::FeatureVector> features, const ChannelKeyMap& keys,
                               const vsa::UnitaryBasis& basis);

struct FuseGradients {
  std::vector<std::vector<double>> features;  // one per channel
  std::vector<double> raw_keys;               // d loss / d u
};

[[nodiscard]] FuseGradients fuse_backward(std::span<const encoder::FeatureVector> features,
                                          const ChannelKeyMap& keys, const vsa::UnitaryBasis& basis,
                                          std::span<const double> upstream);

// Plain channel average, the fusion ablation.
[[nodiscard]] FusedVector fuse_mean(std::span<const encoder::FeatureVector> features);

// Row-major C x C cosine similarities between the channel keys.
struct SimilarityMatrix {
  std::size_t size = 0;
  std::vector<double> values;
  [[nodiscard]] double at(std::size_t a, std::size_t b) const { return values[a * size + b]; }
};

[[nodiscard]] SimilarityMatrix key_similarity_matrix(const ChannelKeyMap& keys, const vsa::UnitaryBasis& basis);

// Header row of labels, then one row per channel.
[[nodiscard]] std::string similarity_csv(const SimilarityMatrix& m, std::span<const std::string> labels);

struct GroupContrast {
  double within = 0.0;
  double between = 0.0;
};

// Mean off-diagonal similarity for channel pairs in the same group vs. in
// different groups.
[[nodiscard]] GroupContrast group_contrast(const SimilarityMatrix& m, std::span<const int> groups);

// ---- graph ops ------------------------------------------------------------

// features [J, C, d], raw keys [C] -> fused [J, d].
[[nodiscard]] nn::Var fuse_hrr(nn::Var features, nn::Var raw_keys, const vsa::UnitaryBasis& basis);
// features [J, C, d] -> [J, d].
[[nodiscard]] nn::Var fuse_channel_mean(nn::Var features);

}  // namespace holofuse::fusion
