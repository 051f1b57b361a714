#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "rvclt/rng.hpp"
#include "rvclt/tail.hpp"
#include "support/quadrature.hpp"

using namespace rvclt;
using rvclt_test::integrate;
using rvclt_test::integrate_to_infinity;

namespace {

// Quadrature oracle for K(x) built only from the tail function:
// K(x) = 2 int_r^x y P(|X|>y) dy - x^2 P(|X|>x) + r^2 P(|X|>r).
double k_oracle(const TailSpec& tail, double x) {
  const double r = tail.support_threshold();
  const double integral =
      integrate([&](double y) { return y * tail.abs_tail_probability(y); }, r, x, 1e-13);
  return 2.0 * integral - x * x * tail.abs_tail_probability(x) +
         r * r * tail.abs_tail_probability(r);
}

std::vector<double> draw_many(const TailSpec& tail, std::size_t count, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> out(count);
  for (auto& v : out) v = tail.sample(rng);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("tail");

TEST_CASE("pareto2 median of |X| is sqrt(2)") {
  const TailSpec tail = TailSpec::pareto2(0.5, 1.0);
  auto sample = draw_many(tail, 200000, 42);
  for (auto& v : sample) v = std::abs(v);
  std::nth_element(sample.begin(), sample.begin() + sample.size() / 2, sample.end());
  CHECK(sample[sample.size() / 2] == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("pareto2 empirical tail matches the exact (r/x)^2 law") {
  const TailSpec tail = TailSpec::pareto2(0.5, 1.0);
  const std::size_t n = 10000000;
  auto sample = draw_many(tail, n, 7);
  std::size_t above = 0;
  for (double v : sample)
    if (std::abs(v) > 10.0) ++above;
  const double phat = static_cast<double>(above) / static_cast<double>(n);
  CHECK(std::abs(phat - 0.01) < 3e-4);
}

TEST_CASE("one-sided pareto2 mean matches the quadrature oracle") {
  // One-sided spec: all mass on the right, scale 2.
  const TailSpec tail = TailSpec::pareto2(1.0, 2.0);
  const double oracle =
      integrate_to_infinity([](double x) { return x * 2.0 * 4.0 / (x * x * x); }, 2.0, 1e-12);
  CHECK(oracle == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(tail.mean() == doctest::Approx(oracle).epsilon(1e-12));
  const std::size_t n = 10000000;
  auto sample = draw_many(tail, n, 11);
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(n);
  CHECK(mean == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("oscillating density with a=b=0 reduces to symmetric pareto2") {
  const TailSpec osc = TailSpec::oscillating(0.0, 0.0, 2.0, 1.5);
  const TailSpec par = TailSpec::pareto2(0.5, 1.5);
  for (double y : {1.5, 2.0, 5.0, 50.0, 1e4})
    CHECK(osc.tail_probability(y) == doctest::Approx(par.tail_probability(y)).epsilon(1e-14));
  for (double x : {2.0, 7.0, 300.0})
    CHECK(osc.truncated_second_moment(x) ==
          doctest::Approx(par.truncated_second_moment(x)).epsilon(1e-12));
}

TEST_CASE("oscillating empirical tail matches the closed form at y = 10") {
  const TailSpec tail = TailSpec::oscillating(0.5, 0.0, 2.0, 1.0);
  const std::size_t n = 10000000;
  auto sample = draw_many(tail, n, 13);
  std::size_t above = 0;
  for (double v : sample)
    if (v > 10.0) ++above;
  const double phat = static_cast<double>(above) / static_cast<double>(n);
  const double expected = tail.tail_probability(10.0);
  CHECK(phat == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("oscillating acceptance rate equals the quadrature oracle, not 1/2") {
  // Oracle: E[(1 + a cos + b sin)/2] under the Pareto(2) radius envelope.
  const OscillatingDensity d(0.5, 0.3, 1.0, 1.0);
  const double r = d.r();
  const double oracle = integrate_to_infinity(
      [&](double u) {
        const double t = d.theta0() * std::log(u);
        const double accept = 0.5 * (1.0 + d.a() * std::cos(t) + d.b() * std::sin(t));
        return accept * 2.0 * r * r / (u * u * u);
      },
      r, 1e-12);
  // Analytic evaluation of the same integral: N(r)/2 = (1 + C)/2 at r = 1.
  CHECK(oracle == doctest::Approx(0.5 * (1.0 + d.C())).epsilon(1e-10));

  // Empirical acceptance frequency over proposals from the envelope.
  RngStream rng(17);
  const std::size_t proposals = 2000000;
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < proposals; ++i) {
    const double u = r / std::sqrt(rng.uniform());
    const double t = d.theta0() * std::log(u);
    if (rng.uniform() < 0.5 * (1.0 + d.a() * std::cos(t) + d.b() * std::sin(t))) ++accepted;
  }
  const double rate = static_cast<double>(accepted) / static_cast<double>(proposals);
  CHECK(rate == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("oscillating normalization: total mass is 1 and c_r = r^2/N(r)") {
  for (const auto& params : {std::array<double, 4>{0.5, 0.0, 2.0, 1.0},
                             std::array<double, 4>{0.3, 0.4, 1.0, 0.5},
                             std::array<double, 4>{0.0, -0.8, 3.0, 2.0}}) {
    const OscillatingDensity d(params[0], params[1], params[2], params[3]);
    const double mass = 2.0 * integrate_to_infinity(
                                  [&](double x) { return d.density(x); }, d.r(), 1e-12);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(d.c_r() == doctest::Approx(d.r() * d.r() / d.modulation(d.r())).epsilon(1e-14));
  }
}

TEST_CASE("tail_probability closed forms") {
  CHECK(TailSpec::pareto2(0.5, 1.0).tail_probability(1.0) == doctest::Approx(0.5));
  const TailSpec flat = TailSpec::oscillating(0.0, 0.0, 2.0, 1.0);
  CHECK(flat.tail_probability(10.0) == doctest::Approx(0.5 * 1e-2).epsilon(1e-14));

  const TailSpec osc = TailSpec::oscillating(0.5, 0.0, 2.0, 1.0);
  const auto& d = osc.oscillating_params();
  const double y = std::exp(3.14159265358979323846 / 2.0);
  const double closed = 0.5 * d.c_r() / (y * y) *
                        (1.0 + d.C() * std::cos(3.14159265358979323846) +
                         d.D() * std::sin(3.14159265358979323846));
  CHECK(osc.tail_probability(y) == doctest::Approx(closed).epsilon(1e-13));
  // Cross-check by integrating the density over (y, infinity).
  const double quad = integrate_to_infinity([&](double x) { return d.density(x); }, y, 1e-13);
  CHECK(osc.tail_probability(y) == doctest::Approx(quad).epsilon(1e-8));
  CHECK_THROWS_AS((void)osc.tail_probability(0.5), std::domain_error);
}

TEST_CASE("truncated second moment closed forms and quadrature oracle") {
  CHECK(TailSpec::pareto2(0.5, 1.0).truncated_second_moment(std::exp(1.0)) ==
        doctest::Approx(2.0).epsilon(1e-14));
  const TailSpec flat = TailSpec::oscillating(0.0, 0.0, 2.0, 1.0);
  CHECK(flat.truncated_second_moment(10.0) ==
        doctest::Approx(2.0 * std::log(10.0)).epsilon(1e-13));

  const TailSpec osc = TailSpec::oscillating(0.5, 0.0, 2.0, 1.0);
  CHECK(osc.truncated_second_moment(100.0) ==
        doctest::Approx(k_oracle(osc, 100.0)).epsilon(1e-8));
  CHECK_THROWS_AS((void)osc.truncated_second_moment(0.99), std::domain_error);
}

TEST_CASE("K closed form equals the quadrature oracle across specs and x") {
  const std::vector<TailSpec> specs{
      TailSpec::pareto2(0.5, 1.0), TailSpec::pareto2(1.0, 2.0),
      TailSpec::oscillating(0.5, 0.0, 2.0, 1.0), TailSpec::oscillating(0.3, 0.4, 1.0, 0.5)};
  for (const auto& tail : specs) {
    const double r = tail.support_threshold();
    for (double x : {1.5 * r, 4.0 * r, 100.0 * r, 1e5 * r}) {
      const double closed = tail.truncated_second_moment(x);
      const double oracle = k_oracle(tail, x);
      CHECK(std::abs(closed - oracle) <= 1e-6 * std::max(std::abs(oracle), 1e-12));
    }
    // K(r) = 0 anchoring on the actual support.
    CHECK(tail.truncated_second_moment(r) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("slow variation of K and non-regular variation of the tail") {
  const TailSpec osc = TailSpec::oscillating(0.5, 0.0, 2.0, 1.0);
  const double ratio =
      osc.truncated_second_moment(2e6) / osc.truncated_second_moment(1e6);
  CHECK(ratio >= 1.0);
  CHECK(ratio <= 1.05);

  // N(2x)/N(x) oscillates: amplitude over a log-spaced grid exceeds 0.01.
  const auto& d = osc.oscillating_params();
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i <= 400; ++i) {
    const double x = std::pow(10.0, 0.015 * i);
    const double ratio_n = d.modulation(2.0 * x) / d.modulation(x);
    lo = std::min(lo, ratio_n);
    hi = std::max(hi, ratio_n);
  }
  CHECK(hi - lo > 0.01);
}

TEST_CASE("sampler and closed-form tail agree at five grid points") {
  for (const TailSpec& tail :
       {TailSpec::pareto2(0.5, 1.0), TailSpec::oscillating(0.5, 0.0, 2.0, 1.0)}) {
    const std::size_t n = 10000000;
    auto sample = draw_many(tail, n, 23);
    for (double y : {2.0, 5.0, 10.0, 30.0, 100.0}) {
      std::size_t above = 0;
      for (double v : sample)
        if (v > y) ++above;
      const double phat = static_cast<double>(above) / static_cast<double>(n);
      const double p = tail.tail_probability(y);
      const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
      CHECK(std::abs(phat - p) <= 3.0 * se);
    }
  }
}

TEST_CASE("degenerate oscillation amplitude a^2+b^2 = 1 is refused by the sampler") {
  const TailSpec tail = TailSpec::oscillating(1.0, 0.0, 2.0, 1.0);  // valid as a density
  RngStream rng(3);
  CHECK_THROWS_AS((void)tail.sample(rng), std::invalid_argument);
  CHECK_THROWS_AS((void)TailSpec::oscillating(0.9, 0.9, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("asymmetric pareto2 splits the tail by p_plus") {
  const TailSpec tail = TailSpec::pareto2(0.75, 1.0);
  CHECK(tail.tail_probability(10.0) == doctest::Approx(0.75 * 0.01).epsilon(1e-14));
  CHECK(tail.abs_tail_probability(10.0) == doctest::Approx(0.01).epsilon(1e-14));
  auto sample = draw_many(tail, 400000, 5);
  std::size_t pos = 0;
  for (double v : sample)
    if (v > 0) ++pos;
  CHECK(static_cast<double>(pos) / static_cast<double>(sample.size()) ==
        doctest::Approx(0.75).epsilon(0.01));
}

TEST_CASE("empirical K on a tiny sample") {
  const std::vector<double> sample{1.0, 2.0, 3.0};
  CHECK(empirical_K(sample, 2.0) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(empirical_K(sample, 0.5) == doctest::Approx(0.0));

  const TailSpec par = TailSpec::pareto2(0.5, 1.0);
  auto big = draw_many(par, 10000000, 29);
  CHECK(empirical_K(big, 100.0) ==
        doctest::Approx(2.0 * std::log(100.0)).epsilon(0.02));
}

TEST_CASE("empirical tail object agrees with its sample") {
  const TailSpec par = TailSpec::pareto2(0.5, 1.0);
  auto sample = draw_many(par, 1000000, 31);
  const TailSpec emp(std::make_shared<const EmpiricalTail>(std::span<const double>(sample)));
  for (double y : {2.0, 10.0, 50.0}) {
    CHECK(emp.abs_tail_probability(y) ==
          doctest::Approx(par.abs_tail_probability(y)).epsilon(0.05));
    CHECK(emp.truncated_second_moment(y) ==
          doctest::Approx(par.truncated_second_moment(y)).epsilon(0.05));
  }
}

TEST_SUITE_END();
