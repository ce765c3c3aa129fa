#include <benchmark/benchmark.h>

#include <vector>

#include "holofuse/encoder.hpp"
#include "holofuse/fusion.hpp"
#include "holofuse/nn/graph.hpp"
#include "holofuse/random.hpp"
#include "holofuse/vsa.hpp"

using namespace holofuse;

namespace {

std::vector<double> noise(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = gaussian(rng);
  return v;
}

void BM_CircularConvolve(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = noise(d, rng), b = noise(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(vsa::circular_convolve(a, b));
}
BENCHMARK(BM_CircularConvolve)->RangeMultiplier(4)->Range(64, 4096);

void BM_Rot(benchmark::State& state) {
  const auto basis = vsa::UnitaryBasis::sample(static_cast<std::size_t>(state.range(0)), 1);
  double r = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(vsa::rot(basis, vsa::AngleFraction(r)));
    r = r < 0.9 ? r + 0.01 : 0.1;
  }
}
BENCHMARK(BM_Rot)->Arg(128)->Arg(1024);

// One patch, C channels, d = 128.
void BM_Fuse(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t d = 128;
  Rng rng(2);
  std::vector<encoder::FeatureVector> features(channels);
  for (std::size_t c = 0; c < channels; ++c) features[c] = {noise(d, rng), c, 0};
  const auto keys = fusion::init_key_map("bench", channels);
  const auto basis = vsa::UnitaryBasis::sample(d, 3);
  for (auto _ : state) benchmark::DoNotOptimize(fusion::fuse(features, keys, basis));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(channels));
}
BENCHMARK(BM_Fuse)->Arg(8)->Arg(32)->Arg(128);

// Forward pass of the default encoder over N patches at 512 Hz.
void BM_EncoderForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const encoder::Encoder enc(encoder::EncoderConfig{});
  nn::ParamStore store;
  Rng rng(4);
  enc.init_params(store, rng);
  const std::size_t w = enc.config().window_samples;
  const nn::Tensor patches({n, 1, w}, noise(n * w, rng));
  for (auto _ : state) {
    nn::Graph g;
    benchmark::DoNotOptimize(enc.forward(g, store, g.constant(patches)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
