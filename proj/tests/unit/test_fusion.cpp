#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "holofuse/errors.hpp"
#include "holofuse/fusion.hpp"
#include "holofuse/nn/gradcheck.hpp"
#include "oracles.hpp"

using namespace holofuse;
using namespace holofuse::fusion;
using encoder::FeatureVector;

namespace {

std::vector<FeatureVector> random_features(std::size_t c, std::size_t d, Rng& rng, std::size_t patch = 0) {
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < c; ++i) {
    FeatureVector f;
    f.channel_index = i;
    f.patch_index = patch;
    f.values.resize(d);
    for (double& x : f.values) x = gaussian(rng);
    out.push_back(std::move(f));
  }
  return out;
}

ChannelKeyMap random_keys(std::size_t c, Rng& rng) {
  ChannelKeyMap k{"s", std::vector<double>(c)};
  for (double& u : k.raw) u = 1.5 * gaussian(rng);
  return k;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("init_key_map spacing") {
  const auto one = init_key_map("a", 1).mapped();
  REQUIRE(one.size() == 1);
  CHECK(one[0] == doctest::Approx(1.5).epsilon(1e-12));
  const auto three = init_key_map("a", 3).mapped();
  CHECK(three[0] == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(three[1] == doctest::Approx(1.50).epsilon(1e-12));
  CHECK(three[2] == doctest::Approx(1.75).epsilon(1e-12));
  CHECK_THROWS_AS((void)init_key_map("a", 0), DomainError);
  for (double m : init_key_map("a", 64).mapped()) {
    CHECK(m > 1.0);
    CHECK(m < 2.0);
  }
}

TEST_CASE("initialized key map gives a banded, monotonically decaying similarity matrix") {
  const auto basis = vsa::UnitaryBasis::sample(128, 1);
  const auto m = key_similarity_matrix(init_key_map("s", 64), basis);
  for (std::size_t a = 0; a < 64; ++a) {
    for (std::size_t b = a + 1; b < 64; ++b) CHECK(m.at(a, b) < m.at(a, b - 1));
    for (std::size_t b = a; b-- > 0;) CHECK(m.at(a, b) < m.at(a, b + 1));
  }
}

TEST_CASE("fuse at full rotation binds with the basis itself") {
  Rng rng(1);
  const auto basis = vsa::UnitaryBasis::sample(64, 9);
  auto features = random_features(1, 64, rng);
  ChannelKeyMap keys{"s", {40.0}};  // m = 2 - eps, r ~ 1
  const auto f = fuse(features, keys, basis);
  const auto want = testing::naive_circular_convolve(features[0].values, to_vec(basis.values()));
  CHECK(testing::max_rel_error(f.values, want) < 1e-9);
}

TEST_CASE("equal keys and equal features interfere constructively") {
  Rng rng(2);
  const auto basis = vsa::UnitaryBasis::sample(32, 2);
  auto features = random_features(1, 32, rng);
  features.push_back(features[0]);
  features[1].channel_index = 1;
  ChannelKeyMap keys{"s", {0.3, 0.3}};
  const auto f = fuse(features, keys, basis);
  const auto single = vsa::circular_convolve(features[0].values, vsa::rot(basis, vsa::AngleFraction(nn::sigmoid(0.3))));
  for (std::size_t i = 0; i < 32; ++i) CHECK(std::abs(f.values[i] - 2.0 * single[i]) < 1e-12);
}

TEST_CASE("fuse equals the sum of naive per-channel bindings") {
  Rng rng(3);
  const auto basis = vsa::UnitaryBasis::sample(64, 4);
  const auto features = random_features(3, 64, rng);
  const auto keys = random_keys(3, rng);
  const auto f = fuse(features, keys, basis);
  std::vector<double> want(64, 0.0);
  const auto r = keys.angles();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto key = testing::naive_rot(to_vec(basis.values()), r[i]);
    const auto bound = testing::naive_circular_convolve(features[i].values, key);
    for (std::size_t n = 0; n < 64; ++n) want[n] += bound[n];
  }
  for (std::size_t n = 0; n < 64; ++n) CHECK(std::abs(f.values[n] - want[n]) < 1e-9);
}

TEST_CASE("fuse input validation") {
  Rng rng(4);
  const auto basis = vsa::UnitaryBasis::sample(16, 4);
  CHECK_THROWS_AS((void)fuse(random_features(3, 16, rng), init_key_map("s", 4), basis), ShapeError);
  CHECK_THROWS_AS((void)fuse(random_features(2, 8, rng), init_key_map("s", 2), basis), ShapeError);
}

TEST_CASE("fused dimension is independent of channel count") {
  Rng rng(5);
  const auto basis = vsa::UnitaryBasis::sample(32, 5);
  for (std::size_t c : {1, 2, 4, 32, 128}) {
    CHECK(fuse(random_features(c, 32, rng), init_key_map("s", c), basis).values.size() == 32);
    CHECK(fuse_mean(random_features(c, 32, rng)).values.size() == 32);
  }
}

TEST_CASE("fuse is invariant to permuting channels together with their keys") {
  Rng rng(6);
  const auto basis = vsa::UnitaryBasis::sample(64, 6);
  const auto features = random_features(5, 64, rng);
  const auto keys = random_keys(5, rng);
  const std::vector<std::size_t> perm = {4, 2, 0, 3, 1};
  std::vector<FeatureVector> pf;
  ChannelKeyMap pk{"s", {}};
  for (std::size_t i : perm) {
    pf.push_back(features[i]);
    pk.raw.push_back(keys.raw[i]);
  }
  const auto a = fuse(features, keys, basis);
  const auto b = fuse(pf, pk, basis);
  for (std::size_t n = 0; n < 64; ++n) CHECK(std::abs(a.values[n] - b.values[n]) < 1e-10);
}

TEST_CASE("fuse_backward edge cases") {
  Rng rng(7);
  const auto basis = vsa::UnitaryBasis::sample(32, 7);
  auto features = random_features(3, 32, rng);
  const auto keys = random_keys(3, rng);
  std::vector<double> upstream(32);
  for (double& g : upstream) g = gaussian(rng);

  SUBCASE("zero feature vector gives zero key gradient") {
    std::fill(features[1].values.begin(), features[1].values.end(), 0.0);
    const auto g = fuse_backward(features, keys, basis, upstream);
    CHECK(g.raw_keys[1] == 0.0);
    CHECK(g.raw_keys[0] != 0.0);
  }
  SUBCASE("zero upstream gives zero gradients") {
    const auto g = fuse_backward(features, keys, basis, std::vector<double>(32, 0.0));
    for (double v : g.raw_keys) CHECK(v == 0.0);
    for (const auto& f : g.features)
      for (double v : f) CHECK(v == 0.0);
  }
}

TEST_CASE("fuse gradients match central differences") {
  Rng rng(8);
  const std::size_t c = 4, d = 32;
  const auto basis = vsa::UnitaryBasis::sample(d, 8);
  const auto features = random_features(c, d, rng);
  const auto keys = random_keys(c, rng);
  std::vector<double> upstream(d);
  for (double& g : upstream) g = gaussian(rng);
  const auto analytic = fuse_backward(features, keys, basis, upstream);

  auto loss = [&](const std::vector<FeatureVector>& fs, const ChannelKeyMap& ks) {
    const auto f = fuse(fs, ks, basis);
    double s = 0.0;
    for (std::size_t n = 0; n < d; ++n) s += upstream[n] * f.values[n];
    return s;
  };
  const double h = 1e-6;
  double worst_u = 0.0, worst_p = 0.0, max_p = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    ChannelKeyMap plus = keys, minus = keys;
    plus.raw[i] += h;
    minus.raw[i] -= h;
    const double numeric = (loss(features, plus) - loss(features, minus)) / (2 * h);
    worst_u = std::max(worst_u, std::abs(numeric - analytic.raw_keys[i]) / std::max(std::abs(numeric), 1e-6));
    for (std::size_t n = 0; n < d; ++n) {
      auto fp = features, fm = features;
      fp[i].values[n] += h;
      fm[i].values[n] -= h;
      const double num = (loss(fp, keys) - loss(fm, keys)) / (2 * h);
      worst_p = std::max(worst_p, std::abs(num - analytic.features[i][n]));
      max_p = std::max(max_p, std::abs(num));
    }
  }
  CHECK(worst_u < 1e-6);
  // Feature error is taken relative to the largest feature gradient: the loss
  // is linear in p, so the difference quotient carries only roundoff, which
  // swamps entrywise ratios for entries near zero.
  CHECK(worst_p / max_p < 1e-8);
}

TEST_CASE("graph op agrees with the standalone fuse and passes a gradient check") {
  Rng rng(9);
  const std::size_t j = 3, c = 5, d = 16;
  const auto basis = vsa::UnitaryBasis::sample(d, 9);
  nn::ParamStore store;
  nn::Tensor feats({j, c, d});
  for (double& x : feats.data()) x = gaussian(rng);
  store.add("feats", feats);
  store.add("keys", nn::Tensor({c}, random_keys(c, rng).raw));
  nn::Tensor g({j, d});
  for (double& x : g.data()) x = gaussian(rng);

  nn::Graph graph;
  const auto fused = fuse_hrr(graph.parameter(store, "feats"), graph.parameter(store, "keys"), basis).value();
  for (std::size_t p = 0; p < j; ++p) {
    std::vector<FeatureVector> fs;
    for (std::size_t i = 0; i < c; ++i) {
      FeatureVector f;
      f.patch_index = p;
      f.values.assign(feats.data().begin() + (p * c + i) * d, feats.data().begin() + (p * c + i + 1) * d);
      fs.push_back(f);
    }
    const auto ref = fuse(fs, ChannelKeyMap{"s", store.at("keys").value.storage()}, basis);
    for (std::size_t n = 0; n < d; ++n) CHECK(std::abs(fused[p * d + n] - ref.values[n]) < 1e-12);
  }

  const auto r = nn::check_gradients(store, [&](nn::Graph& gr, nn::ParamStore& s) {
    nn::Var f = fuse_hrr(gr.parameter(s, "feats"), gr.parameter(s, "keys"), basis);
    return nn::sum_squares(nn::add(f, gr.constant(g)));
  });
  INFO(r.worst_param << "[" << r.worst_index << "] " << r.worst_analytic << " vs " << r.worst_numeric);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("mean fusion") {
  Rng rng(10);
  auto features = random_features(1, 16, rng);
  for (std::size_t i = 1; i < 6; ++i) {
    features.push_back(features[0]);
    features.back().channel_index = i;
  }
  const auto f = fuse_mean(features);
  for (std::size_t n = 0; n < 16; ++n) CHECK(f.values[n] == doctest::Approx(features[0].values[n]).epsilon(1e-14));

  nn::ParamStore store;
  nn::Tensor t({2, 3, 4});
  for (double& x : t.data()) x = gaussian(rng);
  store.add("f", t);
  const auto r = nn::check_gradients(store, [](nn::Graph& g, nn::ParamStore& s) {
    return nn::sum_squares(fuse_channel_mean(g.parameter(s, "f")));
  });
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("key similarity matrix structure") {
  const auto basis = vsa::UnitaryBasis::sample(1024, 11);
  SUBCASE("unit diagonal and symmetry") {
    Rng rng(11);
    const auto m = key_similarity_matrix(random_keys(6, rng), basis);
    for (std::size_t a = 0; a < 6; ++a) {
      CHECK(m.at(a, a) == doctest::Approx(1.0).epsilon(1e-9));
      for (std::size_t b = 0; b < 6; ++b) CHECK(m.at(a, b) == m.at(b, a));
    }
  }
  SUBCASE("identical scalars are fully similar") {
    const auto m = key_similarity_matrix(ChannelKeyMap{"s", {0.2, -0.4, 0.2}}, basis);
    CHECK(m.at(0, 2) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("uniformly spaced keys decay with channel distance") {
    const auto m = key_similarity_matrix(init_key_map("s", 8), basis);
    for (std::size_t gap = 1; gap < 7; ++gap) CHECK(m.at(0, gap + 1) < m.at(0, gap));
  }
}

TEST_CASE("similarity csv and group contrast") {
  SimilarityMatrix m{3, {1.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 1.0}};
  const std::vector<std::string> labels = {"A1", "A2", "B1"};
  const auto csv = similarity_csv(m, labels);
  CHECK(csv.substr(0, csv.find('\n')) == "A1,A2,B1");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const std::vector<int> groups = {0, 0, 1};
  const auto gc = group_contrast(m, groups);
  CHECK(gc.within == doctest::Approx(0.5));
  CHECK(gc.between == doctest::Approx(0.15));
}

// Two channels bundled as f = p_a (*) k_a + p_b (*) k_b, then unbound with
// k_a's inverse (keys are unitary, so the inverse is the conjugate spectrum).
// The wrong channel's reconstruction p_b (*) rot(v, r_b - r_a) keeps a cosine
// with p_b of about sinc(pi * dr), so interference vanishes only as |dr| -> 1.
TEST_CASE("bundled channels separate according to the sinc kernel") {
  const std::size_t d = 1024;
  auto unbound_similarity = [&](double ra, double rb, int trials) {
    Rng rng(12);
    double mean = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto basis = vsa::UnitaryBasis::sample(d, 500 + t);
      auto fs = random_features(2, d, rng);
      const double ua = std::log(ra / (1 - ra)), ub = std::log(rb / (1 - rb));
      const auto f = fuse(fs, ChannelKeyMap{"s", {ua, ub}}, basis);
      // Unbind channel a: multiply by conj(K_a) in the Fourier domain.
      auto spec_f = testing::naive_dft(f.values);
      std::vector<double> out(d, 0.0);
      const auto phases = basis.phases();
      std::vector<std::complex<double>> full(d);
      for (std::size_t k = 0; k < d; ++k) {
        const double theta = k <= d / 2 ? phases[k] : -phases[d - k];
        full[k] = spec_f[k] * std::polar(1.0, -theta * ra);
      }
      for (std::size_t n = 0; n < d; ++n) {
        std::complex<double> s{};
        for (std::size_t k = 0; k < d; ++k)
          s += full[k] * std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k * n % d) / d);
        out[n] = s.real() / d;
      }
      mean += testing::naive_cosine(out, fs[1].values) / trials;
    }
    return mean;
  };
  // Maximal separation: the wrong channel does not leak.
  CHECK(std::abs(unbound_similarity(0.02, 0.98, 10)) < 0.1);
  // A quarter turn still leaks about sinc(pi / 4) / sqrt(2).
  const double quarter = unbound_similarity(0.3, 0.55, 10);
  const double expected = std::sin(std::numbers::pi / 4) / (std::numbers::pi / 4) / std::sqrt(2.0);
  CHECK(quarter == doctest::Approx(expected).epsilon(0.1));
}
