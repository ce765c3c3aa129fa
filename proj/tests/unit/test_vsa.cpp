#include <cmath>
#include <numbers>

#include "doctest.h"
#include "holofuse/errors.hpp"
#include "holofuse/random.hpp"
#include "holofuse/vsa.hpp"
#include "oracles.hpp"

using namespace holofuse;
using namespace holofuse::vsa;

namespace {

Vector random_vector(std::size_t d, Rng& rng) {
  Vector v(d);
  for (double& x : v) x = gaussian(rng);
  return v;
}

Vector to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("unitary basis has unit Fourier magnitudes") {
  const auto v = UnitaryBasis::sample(8, 0);
  const auto spec = testing::naive_dft(to_vec(v.values()));
  for (const auto& c : spec) CHECK(std::abs(c) == doctest::Approx(1.0).epsilon(1e-12));
  // DC and Nyquist pinned to +1.
  CHECK(spec[0].real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spec[4].real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(spec[4].imag()) < 1e-12);
}

TEST_CASE("unitary basis sampling is deterministic") {
  const auto a = UnitaryBasis::sample(8, 0);
  const auto b = UnitaryBasis::sample(8, 0);
  CHECK(to_vec(a.values()) == to_vec(b.values()));
  const auto c = UnitaryBasis::sample(8, 1);
  CHECK(to_vec(a.values()) != to_vec(c.values()));
}

TEST_CASE("unitary basis norm follows from Parseval") {
  // Unit bins, unnormalized forward transform: sum |V_k|^2 = d * sum v_n^2 = d.
  const auto v = UnitaryBasis::sample(1024, 7);
  CHECK(std::abs(l2_norm(v.values()) - 1.0) < 1e-9);
  const auto odd = UnitaryBasis::sample(257, 3);
  CHECK(std::abs(l2_norm(odd.values()) - 1.0) < 1e-9);
  for (double theta : odd.phases()) {
    CHECK(theta > -std::numbers::pi);
    CHECK(theta <= std::numbers::pi);
  }
}

TEST_CASE("unitary basis rejects dimension below 2") {
  CHECK_THROWS_AS((void)UnitaryBasis::sample(1, 0), DomainError);
  CHECK_THROWS_AS((void)UnitaryBasis::sample(0, 0), DomainError);
  CHECK_NOTHROW(UnitaryBasis::sample(2, 0));
}

TEST_CASE("circular convolution examples") {
  const Vector delta = {1, 0, 0, 0};
  const Vector b = {0.5, -0.2, 0.1, 0.7};
  const auto c = circular_convolve(delta, b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(c[i] == doctest::Approx(b[i]).epsilon(1e-12));

  const auto shifted = circular_convolve(Vector{0, 1, 0, 0}, Vector{1, 2, 3, 4});
  const Vector expected = {4, 1, 2, 3};
  for (std::size_t i = 0; i < 4; ++i) CHECK(shifted[i] == doctest::Approx(expected[i]).epsilon(1e-12));

  CHECK_THROWS_AS((void)circular_convolve(Vector{1, 2}, Vector{1, 2, 3}), ShapeError);
}

TEST_CASE("circular convolution matches the direct sum") {
  Rng rng(11);
  for (std::size_t d : {4, 8, 64, 257, 1024}) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = random_vector(d, rng);
      const auto b = random_vector(d, rng);
      worst = std::max(worst, testing::max_rel_error(circular_convolve(a, b), testing::naive_circular_convolve(a, b)));
    }
    INFO("d = " << d);
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("binding algebra") {
  Rng rng(5);
  const std::size_t d = 64;
  const auto a = random_vector(d, rng);
  const auto b = random_vector(d, rng);
  const auto k = random_vector(d, rng);
  Vector delta(d, 0.0);
  delta[0] = 1.0;
  CHECK(testing::max_rel_error(circular_convolve(a, delta), a) < 1e-10);

  SUBCASE("commutative and associative") {
    CHECK(testing::max_rel_error(circular_convolve(a, b), circular_convolve(b, a)) < 1e-12);
    CHECK(testing::max_rel_error(circular_convolve(circular_convolve(a, b), k),
                                 circular_convolve(a, circular_convolve(b, k))) < 1e-10);
  }
  SUBCASE("distributive over bundling") {
    Vector sum(d);
    for (std::size_t i = 0; i < d; ++i) sum[i] = a[i] + b[i];
    const auto lhs = circular_convolve(sum, k);
    const auto ak = circular_convolve(a, k);
    const auto bk = circular_convolve(b, k);
    for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(lhs[i] - (ak[i] + bk[i])) < 1e-9);
  }
}

TEST_CASE("rotation identities") {
  const auto v = UnitaryBasis::sample(64, 3);
  SUBCASE("r = 0 gives the impulse") {
    const auto r0 = rot(v, AngleFraction(0.0));
    CHECK(std::abs(r0[0] - 1.0) < 1e-12);
    for (std::size_t i = 1; i < r0.size(); ++i) CHECK(std::abs(r0[i]) < 1e-12);
  }
  SUBCASE("r = 1 gives v") {
    const auto r1 = rot(v, AngleFraction(1.0));
    for (std::size_t i = 0; i < r1.size(); ++i) CHECK(std::abs(r1[i] - v.values()[i]) < 1e-12);
  }
  SUBCASE("half rotations compose") {
    const auto h = rot(v, AngleFraction(0.5));
    const auto full = circular_convolve(h, h);
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(std::abs(full[i] - v.values()[i]) < 1e-9);
  }
  SUBCASE("domain") {
    CHECK_THROWS_AS(AngleFraction(-0.01), DomainError);
    CHECK_THROWS_AS(AngleFraction(1.01), DomainError);
    CHECK_THROWS_AS(AngleFraction(std::nan("")), DomainError);
  }
}

TEST_CASE("rotation preserves the norm and matches brute-force exponentiation") {
  Rng rng(99);
  for (std::size_t d : {8, 63, 128}) {
    const auto v = UnitaryBasis::sample(d, d);
    for (int i = 0; i < 20; ++i) {
      const double r = uniform01(rng);
      const auto k = rot(v, AngleFraction(r));
      CHECK(std::abs(l2_norm(k) - 1.0) < 1e-9);
      CHECK(testing::max_rel_error(k, testing::naive_rot(to_vec(v.values()), r)) < 1e-9);
    }
  }
}

TEST_CASE("key similarity depends only on the angle difference") {
  const auto v = UnitaryBasis::sample(256, 21);
  CHECK(key_similarity(v, AngleFraction(0.37), AngleFraction(0.37)) == doctest::Approx(1.0).epsilon(1e-9));
  const double s1 = key_similarity(v, AngleFraction(0.1), AngleFraction(0.4));
  const double s2 = key_similarity(v, AngleFraction(0.5), AngleFraction(0.8));
  const double s3 = key_similarity(v, AngleFraction(0.8), AngleFraction(0.5));
  CHECK(std::abs(s1 - s2) < 1e-12);
  CHECK(std::abs(s2 - s3) < 1e-12);
}

TEST_CASE("averaged key kernel is sinc-shaped and its zero crossing matches brute force") {
  const std::size_t d = 1024;
  const int bases = 100;
  const int steps = 100;  // grid step 0.01 over [0, 1]
  std::vector<double> impl(steps + 1, 0.0);
  std::vector<double> brute(steps + 1, 0.0);
  for (int b = 0; b < bases; ++b) {
    const auto v = UnitaryBasis::sample(d, 1000 + b);
    const auto spec = testing::naive_dft(to_vec(v.values()));
    for (int g = 0; g <= steps; ++g) {
      const double dr = static_cast<double>(g) / steps;
      impl[g] += key_similarity(v, AngleFraction(0.0), AngleFraction(dr)) / bases;
      double s = 0.0;
      for (const auto& c : spec) s += std::cos(std::arg(c) * dr);
      brute[g] += s / static_cast<double>(d) / bases;
    }
  }
  auto first_crossing = [&](const std::vector<double>& curve) {
    for (int g = 0; g <= steps; ++g)
      if (curve[g] <= 0.0) return g;
    return steps + 1;
  };
  CHECK(std::abs(first_crossing(impl) - first_crossing(brute)) <= 2);
  // Uniform phases on (-pi, pi] give E[cos(theta dr)] = sin(pi dr) / (pi dr).
  CHECK(impl[0] == doctest::Approx(1.0).epsilon(1e-9));
  for (int g = 1; g <= steps; ++g) {
    const double x = std::numbers::pi * g / steps;
    CHECK(std::abs(impl[g] - std::sin(x) / x) < 0.02);
    CHECK(impl[g] <= impl[g - 1] + 1e-3);
  }
  CHECK(std::abs(first_crossing(impl) - steps) <= 2);
}

TEST_CASE("independent bases are quasi-orthogonal") {
  const std::size_t d = 1024;
  int inside = 0;
  for (int pair = 0; pair < 1000; ++pair) {
    const auto a = UnitaryBasis::sample(d, 2 * pair);
    const auto b = UnitaryBasis::sample(d, 2 * pair + 1);
    if (std::abs(cosine_similarity(a.values(), b.values())) < 5.0 / std::sqrt(static_cast<double>(d))) ++inside;
  }
  CHECK(inside >= 990);
}

TEST_CASE("bundle sums elementwise") {
  const std::vector<Vector> vs = {{1, 2}, {3, 4}, {-1, 0.5}};
  const auto s = bundle(vs);
  CHECK(s[0] == doctest::Approx(3.0));
  CHECK(s[1] == doctest::Approx(6.5));
  CHECK_THROWS_AS((void)bundle(std::vector<Vector>{{1.0}, {1.0, 2.0}}), ShapeError);
}
