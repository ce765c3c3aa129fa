#include "holofuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "holofuse/errors.hpp"

namespace holofuse::fusion {

using nn::Graph;
using nn::Tensor;
using nn::Var;

std::vector<double> ChannelKeyMap::mapped() const {
  std::vector<double> m(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) m[i] = 1.0 + nn::sigmoid(raw[i]);
  return m;
}

std::vector<double> ChannelKeyMap::angles() const {
  std::vector<double> r(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) r[i] = nn::sigmoid(raw[i]);
  return r;
}

ChannelKeyMap init_key_map(std::string subject_id, std::size_t channels) {
  if (channels < 1) throw DomainError("init_key_map: channel count must be >= 1");
  ChannelKeyMap keys{std::move(subject_id), std::vector<double>(channels)};
  for (std::size_t i = 0; i < channels; ++i) {
    const double r = channels == 1 ? 0.5 : 0.25 + 0.5 * static_cast<double>(i) / static_cast<double>(channels - 1);
    keys.raw[i] = std::log(r / (1.0 - r));
  }
  return keys;
}

namespace {

// Shared kernel of the graph op and the standalone helpers. `features` is
// [J, C, d] row-major.
struct HrrPass {
  std::size_t patches;
  std::size_t channels;
  std::size_t dim;
  const vsa::UnitaryBasis* basis;
  std::vector<double> angles;
  std::vector<vsa::Spectrum> key_spectra;  // per channel
  std::vector<Complex> feature_spectra;    // [J, C, bins]

  HrrPass(std::span<const double> features, std::size_t j, std::size_t c, std::span<const double> raw,
          const vsa::UnitaryBasis& b)
      : patches(j), channels(c), dim(b.dim()), basis(&b) {
    const auto fft = real_fft(dim);
    const std::size_t bins = fft->bins();
    angles.resize(c);
    key_spectra.reserve(c);
    for (std::size_t i = 0; i < c; ++i) {
      angles[i] = nn::sigmoid(raw[i]);
      key_spectra.push_back(vsa::rot_spectrum(b, angles[i]));
    }
    feature_spectra.resize(j * c * bins);
    for (std::size_t p = 0; p < j * c; ++p) {
      fft->forward(features.subspan(p * dim, dim), std::span(feature_spectra).subspan(p * bins, bins));
    }
  }

  void forward(std::span<double> out) const {
    const auto fft = real_fft(dim);
    const std::size_t bins = fft->bins();
    vsa::Spectrum acc(bins);
    for (std::size_t j = 0; j < patches; ++j) {
      std::fill(acc.begin(), acc.end(), Complex{});
      for (std::size_t i = 0; i < channels; ++i) {
        const Complex* fp = feature_spectra.data() + (j * channels + i) * bins;
        const auto& key = key_spectra[i];
        for (std::size_t k = 0; k < bins; ++k) acc[k] += fp[k] * key[k];
      }
      fft->inverse(acc, out.subspan(j * dim, dim));
    }
  }

  // Accumulates into grad_features ([J, C, d], may be empty) and grad_raw ([C], may be empty).
  void backward(std::span<const double> upstream, std::span<double> grad_features,
                std::span<double> grad_raw) const {
    const auto fft = real_fft(dim);
    const std::size_t bins = fft->bins();
    vsa::Spectrum g(bins);
    vsa::Spectrum tmp(bins);
    std::vector<double> row(dim);
    std::vector<double> d_angle(channels, 0.0);
    const auto phases = basis->phases();
    for (std::size_t j = 0; j < patches; ++j) {
      fft->forward(upstream.subspan(j * dim, dim), g);
      for (std::size_t i = 0; i < channels; ++i) {
        const auto& key = key_spectra[i];
        if (!grad_features.empty()) {
          // Correlation with the key: F^{-1}(G . conj(K)).
          for (std::size_t k = 0; k < bins; ++k) tmp[k] = g[k] * std::conj(key[k]);
          fft->inverse(tmp, row);
          double* dst = grad_features.data() + (j * channels + i) * dim;
          for (std::size_t n = 0; n < dim; ++n) dst[n] += row[n];
        }
        if (!grad_raw.empty()) {
          // <g, F^{-1}(P . i theta K)> via Parseval over the half spectrum.
          const Complex* fp = feature_spectra.data() + (j * channels + i) * bins;
          double s = 0.0;
          for (std::size_t k = 0; k < bins; ++k) {
            const Complex dy = fp[k] * Complex(0.0, phases[k]) * key[k];
            s += half_spectrum_weight(k, dim) * (std::conj(g[k]) * dy).real();
          }
          d_angle[i] += s / static_cast<double>(dim);
        }
      }
    }
    if (!grad_raw.empty()) {
      for (std::size_t i = 0; i < channels; ++i) {
        grad_raw[i] += d_angle[i] * angles[i] * (1.0 - angles[i]);
      }
    }
  }
};

std::vector<double> flatten(std::span<const encoder::FeatureVector> features, std::size_t dim) {
  std::vector<double> flat;
  flat.reserve(features.size() * dim);
  const std::size_t j = features.front().patch_index;
  for (const auto& f : features) {
    if (f.values.size() != dim) {
      throw ShapeError("fuse: feature dimension " + std::to_string(f.values.size()) + " != basis dimension " +
                       std::to_string(dim));
    }
    if (f.patch_index != j) throw DataError("fuse: features mix patch indices");
    flat.insert(flat.end(), f.values.begin(), f.values.end());
  }
  return flat;
}

void check_channels(std::size_t features, const ChannelKeyMap& keys) {
  if (features == 0) throw ShapeError("fuse: no channel features");
  if (features != keys.channels()) {
    throw ShapeError("fuse: " + std::to_string(features) + " channel features but key map '" + keys.subject_id +
                     "' has " + std::to_string(keys.channels()) + " channels");
  }
}

}  // namespace

FusedVector fuse(std::span<const encoder::FeatureVector> features, const ChannelKeyMap& keys,
                 const vsa::UnitaryBasis& basis) {
  check_channels(features.size(), keys);
  const auto flat = flatten(features, basis.dim());
  HrrPass pass(flat, 1, features.size(), keys.raw, basis);
  FusedVector out{std::vector<double>(basis.dim()), features.front().patch_index};
  pass.forward(out.values);
  return out;
}

FuseGradients fuse_backward(std::span<const encoder::FeatureVector> features, const ChannelKeyMap& keys,
                            const vsa::UnitaryBasis& basis, std::span<const double> upstream) {
  check_channels(features.size(), keys);
  if (upstream.size() != basis.dim()) throw ShapeError("fuse_backward: upstream gradient has wrong length");
  const auto flat = flatten(features, basis.dim());
  HrrPass pass(flat, 1, features.size(), keys.raw, basis);
  std::vector<double> grad_features(flat.size(), 0.0);
  FuseGradients out;
  out.raw_keys.assign(features.size(), 0.0);
  pass.backward(upstream, grad_features, out.raw_keys);
  const std::size_t d = basis.dim();
  for (std::size_t i = 0; i < features.size(); ++i) {
    out.features.emplace_back(grad_features.begin() + static_cast<std::ptrdiff_t>(i * d),
                              grad_features.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  }
  return out;
}

FusedVector fuse_mean(std::span<const encoder::FeatureVector> features) {
  if (features.empty()) throw ShapeError("fuse_mean: no channel features");
  const std::size_t d = features.front().values.size();
  FusedVector out{std::vector<double>(d, 0.0), features.front().patch_index};
  for (const auto& f : features) {
    if (f.values.size() != d) throw ShapeError("fuse_mean: feature dimension mismatch");
    for (std::size_t n = 0; n < d; ++n) out.values[n] += f.values[n];
  }
  for (double& x : out.values) x /= static_cast<double>(features.size());
  return out;
}

SimilarityMatrix key_similarity_matrix(const ChannelKeyMap& keys, const vsa::UnitaryBasis& basis) {
  const std::size_t c = keys.channels();
  const auto r = keys.angles();
  std::vector<vsa::Vector> rotated;
  rotated.reserve(c);
  for (double a : r) rotated.push_back(vsa::rot(basis, vsa::AngleFraction(a)));
  SimilarityMatrix m{c, std::vector<double>(c * c, 0.0)};
  for (std::size_t a = 0; a < c; ++a) {
    m.values[a * c + a] = 1.0;
    for (std::size_t b = a + 1; b < c; ++b) {
      const double s = vsa::cosine_similarity(rotated[a], rotated[b]);
      m.values[a * c + b] = s;
      m.values[b * c + a] = s;
    }
  }
  return m;
}

std::string similarity_csv(const SimilarityMatrix& m, std::span<const std::string> labels) {
  if (labels.size() != m.size) throw ShapeError("similarity_csv: label count does not match matrix size");
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < labels.size(); ++i) out << (i ? "," : "") << labels[i];
  out << '\n';
  for (std::size_t a = 0; a < m.size; ++a) {
    for (std::size_t b = 0; b < m.size; ++b) out << (b ? "," : "") << m.at(a, b);
    out << '\n';
  }
  return out.str();
}

GroupContrast group_contrast(const SimilarityMatrix& m, std::span<const int> groups) {
  if (groups.size() != m.size) throw ShapeError("group_contrast: group labels do not match matrix size");
  double within = 0.0, between = 0.0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t a = 0; a < m.size; ++a) {
    for (std::size_t b = a + 1; b < m.size; ++b) {
      if (groups[a] == groups[b]) {
        within += m.at(a, b);
        ++nw;
      } else {
        between += m.at(a, b);
        ++nb;
      }
    }
  }
  return {nw ? within / static_cast<double>(nw) : 0.0, nb ? between / static_cast<double>(nb) : 0.0};
}

Var fuse_hrr(Var features, Var raw_keys, const vsa::UnitaryBasis& basis) {
  const auto& shape = features.shape();
  if (shape.size() != 3) throw ShapeError("fuse_hrr: features must be [J, C, d], got " + nn::shape_string(shape));
  const std::size_t j = shape[0], c = shape[1], d = shape[2];
  if (d != basis.dim()) {
    throw ShapeError("fuse_hrr: feature dimension " + std::to_string(d) + " != basis dimension " +
                     std::to_string(basis.dim()));
  }
  if (raw_keys.value().size() != c) {
    throw ShapeError("fuse_hrr: " + std::to_string(c) + " channels but " + std::to_string(raw_keys.value().size()) +
                     " channel keys");
  }
  auto pass = std::make_shared<HrrPass>(features.value().data(), j, c, raw_keys.value().data(), basis);
  Tensor out({j, d});
  pass->forward(out.data());
  return features.graph->record(std::move(out), {features, raw_keys},
                                [features, raw_keys, pass](Graph& g, const Tensor& gout) {
                                  std::span<double> gf;
                                  std::span<double> gk;
                                  if (features.requires_grad()) gf = g.grad(features.id).data();
                                  if (raw_keys.requires_grad()) gk = g.grad(raw_keys.id).data();
                                  pass->backward(gout.data(), gf, gk);
                                });
}

Var fuse_channel_mean(Var features) {
  const auto& shape = features.shape();
  if (shape.size() != 3) throw ShapeError("fuse_channel_mean: features must be [J, C, d]");
  const std::size_t j = shape[0], c = shape[1], d = shape[2];
  Tensor out({j, d});
  const Tensor& fv = features.value();
  const double inv = 1.0 / static_cast<double>(c);
  for (std::size_t p = 0; p < j; ++p)
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t n = 0; n < d; ++n) out[p * d + n] += fv[(p * c + i) * d + n] * inv;
  return features.graph->record(std::move(out), {features}, [features, j, c, d, inv](Graph& g, const Tensor& gout) {
    Tensor& gf = g.grad(features.id);
    for (std::size_t p = 0; p < j; ++p)
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t n = 0; n < d; ++n) gf[(p * c + i) * d + n] += gout[p * d + n] * inv;
  });
}

}  // namespace holofuse::fusion
