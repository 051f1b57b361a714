#include <doctest.h>

#include <cmath>
#include <vector>

#include "rvclt/models.hpp"
#include "rvclt/rng.hpp"
#include "rvclt/variance.hpp"
#include "support/quadrature.hpp"

using namespace rvclt;

TEST_SUITE_BEGIN("variance");

TEST_CASE("m-dependent spectral variance: enumerated linear atoms") {
  CHECK(sigma2_m_dependent(SpectralTailLaw::linear({1.0})).sigma2 == doctest::Approx(1.0));
  CHECK(sigma2_m_dependent(SpectralTailLaw::linear({1.0, 1.0})).sigma2 ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(sigma2_m_dependent(SpectralTailLaw::linear({1.0, -1.0})).sigma2 ==
        doctest::Approx(0.0));
}

TEST_CASE("enumeration equals the closed form for random psi vectors") {
  RngStream rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 1 + rng.next_u64() % 6;
    std::vector<double> psi(len);
    psi[0] = 1.0;
    for (std::size_t j = 1; j < len; ++j) psi[j] = -2.0 + 4.0 * rng.uniform();
    const double enumerated = sigma2_m_dependent(SpectralTailLaw::linear(psi)).sigma2;
    const double closed = sigma2_linear(psi).paper.sigma2;
    CHECK(std::abs(enumerated - closed) < 1e-12);
  }
}

TEST_CASE("monte-carlo spectral route agrees with enumeration within 3 stderr") {
  const std::vector<double> psi{1.0, 0.7, -0.4};
  const auto linear = SpectralTailLaw::linear(psi);
  const double exact = linear.enumerate_sigma2();
  // Route the same law through the sampler interface to force the MC path.
  const auto sampler = SpectralTailLaw::sampler(
      linear.window(), [linear](RngStream& rng, std::span<double> theta) {
        linear.draw(rng, theta);
      });
  const auto mc = sigma2_m_dependent(sampler, 1000000, 99);
  CHECK(mc.method == VarianceMethod::spectral_mc);
  CHECK(mc.mc_stderr > 0.0);
  CHECK(std::abs(mc.sigma2 - exact) <= 3.0 * mc.mc_stderr);
}

TEST_CASE("linear-process variance under both normalizations") {
  const auto one = sigma2_linear(std::vector<double>{1.0});
  CHECK(one.paper.sigma2 == doctest::Approx(1.0));
  CHECK(one.noise.sigma2 == doctest::Approx(1.0));

  const auto two = sigma2_linear(std::vector<double>{1.0, 1.0});
  CHECK(two.paper.sigma2 == doctest::Approx(2.0));
  CHECK(two.noise.sigma2 == doctest::Approx(4.0));

  // Geometric rule 2^-j: partial sums converge to sigma~2 = 4, sigma2 = 3.
  double prev_gap = 1e9;
  for (int m : {5, 10, 20, 40}) {
    const auto psi = CoefficientRule::geometric(0.5).coefficients(m);
    const auto s = sigma2_linear(psi);
    const double gap = std::abs(s.noise.sigma2 - 4.0);
    CHECK(gap < prev_gap);
    prev_gap = gap;
    if (m == 40) {
      CHECK(s.noise.sigma2 == doctest::Approx(4.0).epsilon(1e-10));
      CHECK(s.paper.sigma2 == doctest::Approx(3.0).epsilon(1e-10));
    }
  }
  CHECK_THROWS_AS((void)sigma2_linear(std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("stochastic volatility variance under both normalizations") {
  const auto zero = sigma2_sv(std::vector<double>{0.0});
  CHECK(zero.paper.sigma2 == doctest::Approx(1.0));
  CHECK(zero.noise.sigma2 == doctest::Approx(1.0));
  const auto one = sigma2_sv(std::vector<double>{1.0});
  CHECK(one.noise.sigma2 == doctest::Approx(std::exp(2.0)).epsilon(1e-14));
  const auto geo = sigma2_sv(CoefficientRule::geometric(0.5).coefficients(60));
  CHECK(geo.noise.sigma2 == doctest::Approx(std::exp(8.0 / 3.0)).epsilon(1e-10));
}

TEST_CASE("kesten-goldie constants: closed forms vs quadrature oracle") {
  const ALaw a_law = ALaw::kesten_goldie_log_normal(0.5);
  const KgConstants kc = kg_constants(a_law, BLaw::constant(1.0));
  CHECK(kc.m2 == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(kc.c0 == doctest::Approx(kc.c_infinity).epsilon(1e-15));  // B = 1 identity
  CHECK(kc.mean_x == doctest::Approx(8.510414).epsilon(1e-6));

  // Independent oracle: every moment by quadrature against the normal density.
  const double pi = 3.14159265358979323846;
  auto lognormal_moment = [&](auto integrand) {
    return rvclt_test::integrate(
        [&](double z) {
          const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi);
          return integrand(-0.25 + 0.5 * z) * phi;
        },
        -14.0, 14.0, 1e-13);
  };
  const double ea = lognormal_moment([](double la) { return std::exp(la); });
  const double m2 = lognormal_moment([](double la) { return std::exp(2.0 * la) * la; });
  const double c0_oracle = (1.0 + ea) / ((1.0 - ea) * 2.0 * m2);
  CHECK(kc.c0 == doctest::Approx(c0_oracle).epsilon(1e-8));
  CHECK(kc.c0 == doctest::Approx(32.041656).epsilon(1e-6));
}

TEST_CASE("kesten-goldie constants for a discrete A law") {
  const ALaw a_law = ALaw::discrete({0.0, std::sqrt(2.0)}, {0.5, 0.5});
  const KgConstants kc = kg_constants(a_law, BLaw::constant(1.0));
  const double ea = std::sqrt(2.0) / 2.0;
  const double m2 = std::log(std::sqrt(2.0));
  CHECK(kc.m2 == doctest::Approx(m2).epsilon(1e-14));
  CHECK(kc.c0 == doctest::Approx((1.0 + ea) / ((1.0 - ea) * 2.0 * m2)).epsilon(1e-14));
}

TEST_CASE("kesten-goldie rejects broken laws") {
  CHECK_THROWS_AS((void)kg_constants(ALaw::constant(1.0), BLaw::constant(1.0)),
                  std::invalid_argument);  // E[A] = 1
  CHECK_THROWS_AS((void)kg_constants(ALaw::constant(0.5), BLaw::constant(1.0)),
                  std::invalid_argument);  // E[A^2] != 1
  CHECK_THROWS_AS(
      (void)kg_constants(ALaw::kesten_goldie_log_normal(0.5), BLaw::tail(TailSpec::pareto2())),
      std::invalid_argument);  // E[B^2] infinite
}

TEST_CASE("grey constants and the paper fixed-point identities") {
  const GgConstants zero = gg_constants(ALaw::constant(0.0));
  CHECK(zero.mean_c == doctest::Approx(1.0));
  CHECK(zero.second_moment_c == doctest::Approx(1.0));
  CHECK(zero.c0 == doctest::Approx(1.0));
  CHECK(zero.tail_equiv == doctest::Approx(1.0));

  const GgConstants half = gg_constants(ALaw::constant(0.5));
  CHECK(half.mean_c == doctest::Approx(2.0));
  CHECK(half.second_moment_c == doctest::Approx(4.0));
  CHECK(half.c0 == doctest::Approx(3.0));
  CHECK(half.tail_equiv == doctest::Approx(4.0 / 3.0));

  // Discrete law engineered for E[A] = 0.5, E[A^2] = 0.3.
  const ALaw mixed = ALaw::discrete({0.3, 0.75}, {5.0 / 9.0, 4.0 / 9.0});
  CHECK(mixed.mean() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(mixed.second_moment() == doctest::Approx(0.3).epsilon(1e-14));
  const GgConstants gc = gg_constants(mixed);
  CHECK(gc.c0 == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(gc.second_moment_c == doctest::Approx(1.5 / (0.7 * 0.5)).epsilon(1e-14));

  for (const ALaw& law : {ALaw::constant(0.5), mixed, ALaw::log_normal(-2.0, 0.4)}) {
    const GgConstants c = gg_constants(law);
    const double ea = law.mean(), ea2 = law.second_moment();
    CHECK(std::abs(c.mean_c - (1.0 + c.mean_c * ea)) < 1e-12);
    CHECK(std::abs(c.second_moment_c -
                   (1.0 + ea2 * c.second_moment_c + 2.0 * ea * c.mean_c)) < 1e-12);
  }
  CHECK_THROWS_AS((void)gg_constants(ALaw::constant(1.0)), std::invalid_argument);
}

TEST_CASE("grey moments match a simulated C recursion") {
  // C_t = 1 + A_t C_{t-1} oracle for a genuinely random A.
  const ALaw law = ALaw::log_normal(-2.0, 0.4);
  const GgConstants gc = gg_constants(law);
  RngStream rng(31337);
  double c = 1.0, sum = 0.0, sum_sq = 0.0;
  const std::size_t burn = 200, reps = 2000000;
  for (std::size_t t = 0; t < burn; ++t) c = 1.0 + law.sample(rng) * c;
  for (std::size_t t = 0; t < reps; ++t) {
    c = 1.0 + law.sample(rng) * c;
    sum += c;
    sum_sq += c * c;
  }
  CHECK(sum / static_cast<double>(reps) == doctest::Approx(gc.mean_c).epsilon(0.01));
  CHECK(sum_sq / static_cast<double>(reps) ==
        doctest::Approx(gc.second_moment_c).epsilon(0.02));
}

TEST_CASE("sigma2 is nonnegative and degenerates exactly when sum psi = 0") {
  CHECK(sigma2_linear(std::vector<double>{1.0, -2.0, 1.0}).paper.sigma2 ==
        doctest::Approx(0.0));
  RngStream rng(5150);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> psi(1 + rng.next_u64() % 6);
    psi[0] = 1.0;
    for (std::size_t j = 1; j < psi.size(); ++j) psi[j] = -2.0 + 4.0 * rng.uniform();
    CHECK(sigma2_linear(psi).paper.sigma2 >= 0.0);
    CHECK(sigma2_m_dependent(SpectralTailLaw::linear(psi)).sigma2 >= 0.0);
  }
}

TEST_CASE("kesten-goldie tail split sums to c_inf with a one-sided B") {
  const ALaw a_law = ALaw::kesten_goldie_log_normal(0.5);
  const auto kg = ModelSpec::sre_kesten_goldie(a_law, BLaw::constant(1.0));
  const KgConstants kc = kg_constants(a_law, BLaw::constant(1.0));
  const auto split = kg_tail_split(kg, 4000000, 0.9995, 77);
  CHECK(split.c_minus == doctest::Approx(0.0));  // X >= 1 almost surely
  CHECK(split.c_plus == doctest::Approx(kc.c_infinity).epsilon(0.25));
}

TEST_SUITE_END();
