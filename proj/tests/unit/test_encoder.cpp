#include "doctest.h"
#include "holofuse/encoder.hpp"
#include "holofuse/errors.hpp"
#include "holofuse/nn/gradcheck.hpp"

using namespace holofuse;
using namespace holofuse::encoder;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.levels = 2;
  c.kernel_size = 3;
  c.widths = {3, 4};
  c.output_dim = 8;
  c.window_samples = 24;
  return c;
}

Patch random_patch(std::size_t w, std::size_t channel, std::size_t index, Rng& rng) {
  Patch p;
  p.channel_index = channel;
  p.patch_index = index;
  p.samples.resize(w);
  for (double& x : p.samples) x = gaussian(rng);
  return p;
}

}  // namespace

TEST_CASE("default encoder maps a 7.5 s patch at 512 Hz to 128 features") {
  Encoder enc{EncoderConfig{}};
  nn::ParamStore store;
  Rng rng(0);
  enc.init_params(store, rng);
  Patch p = random_patch(3840, 0, 0, rng);
  const auto f = enc.encode(p, store);
  CHECK(f.values.size() == 128);
}

TEST_CASE("encoder is blind to the channel index") {
  Encoder enc{small_config()};
  nn::ParamStore store;
  Rng rng(1);
  enc.init_params(store, rng);
  Patch a = random_patch(24, 0, 3, rng);
  Patch b = a;
  b.channel_index = 17;
  CHECK(enc.encode(a, store).values == enc.encode(b, store).values);
}

TEST_CASE("zero patch with bias-free parameters gives zero features") {
  Encoder enc{small_config()};
  nn::ParamStore store;
  Rng rng(2);
  enc.init_params(store, rng);
  for (const auto& name : enc.param_names())
    if (name.ends_with("/b")) store.at(name).value.fill(0.0);
  Patch p;
  p.samples.assign(24, 0.0);
  for (double v : enc.encode(p, store).values) CHECK(v == 0.0);
}

TEST_CASE("encoder rejects patches of the wrong length") {
  Encoder enc{small_config()};
  nn::ParamStore store;
  Rng rng(3);
  enc.init_params(store, rng);
  Patch p = random_patch(23, 0, 0, rng);
  CHECK_THROWS_AS((void)enc.encode(p, store), ShapeError);
}

TEST_CASE("invalid encoder config") {
  EncoderConfig c = small_config();
  c.widths = {3};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.output_dim = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("encode_all is a per-channel map") {
  Encoder enc{small_config()};
  nn::ParamStore store;
  Rng rng(4);
  enc.init_params(store, rng);

  SUBCASE("single channel") {
    std::vector<Patch> ps = {random_patch(24, 0, 5, rng)};
    const auto all = enc.encode_all(ps, store);
    REQUIRE(all.size() == 1);
    CHECK(all[0].values == enc.encode(ps[0], store).values);
  }
  SUBCASE("twelve channels match twelve independent calls bitwise") {
    std::vector<Patch> ps;
    for (std::size_t c = 0; c < 12; ++c) ps.push_back(random_patch(24, c, 9, rng));
    const auto all = enc.encode_all(ps, store);
    REQUIRE(all.size() == 12);
    for (std::size_t c = 0; c < 12; ++c) {
      CHECK(all[c].values == enc.encode(ps[c], store).values);
      CHECK(all[c].channel_index == c);
      CHECK(all[c].patch_index == 9);
    }
  }
  SUBCASE("channel permutation permutes outputs") {
    std::vector<Patch> ps;
    for (std::size_t c = 0; c < 5; ++c) ps.push_back(random_patch(24, c, 0, rng));
    std::vector<Patch> perm = {ps[3], ps[0], ps[4], ps[1], ps[2]};
    const auto a = enc.encode_all(ps, store);
    const auto b = enc.encode_all(perm, store);
    CHECK(b[0].values == a[3].values);
    CHECK(b[1].values == a[0].values);
    CHECK(b[2].values == a[4].values);
    CHECK(b[3].values == a[1].values);
    CHECK(b[4].values == a[2].values);
  }
  SUBCASE("mixed patch indices are rejected") {
    std::vector<Patch> ps = {random_patch(24, 0, 1, rng), random_patch(24, 1, 2, rng)};
    CHECK_THROWS_AS((void)enc.encode_all(ps, store), DataError);
  }
  SUBCASE("any channel count gives output_dim features") {
    for (std::size_t c : {1, 3, 40}) {
      std::vector<Patch> ps;
      for (std::size_t i = 0; i < c; ++i) ps.push_back(random_patch(24, i, 0, rng));
      for (const auto& f : enc.encode_all(ps, store)) CHECK(f.values.size() == 8);
    }
  }
}

TEST_CASE("encoder gradients match finite differences") {
  Encoder enc{small_config()};
  nn::ParamStore store;
  Rng rng(6);
  enc.init_params(store, rng);
  for (const auto& name : enc.param_names())
    if (name.ends_with("/b"))
      for (double& v : store.at(name).value.data()) v = 0.1 * gaussian(rng);
  nn::Tensor x({3, 1, 24});
  for (double& v : x.data()) v = gaussian(rng);
  const auto r = nn::check_gradients(store, [&](nn::Graph& g, nn::ParamStore& s) {
    return nn::sum_squares(enc.forward(g, s, g.constant(x)));
  });
  INFO(r.worst_param << "[" << r.worst_index << "] " << r.worst_analytic << " vs " << r.worst_numeric);
  CHECK(r.max_rel_error < 1e-4);
}
