#include <doctest.h>

#include <cmath>
#include <vector>

#include "rvclt/diagnostics.hpp"
#include "rvclt/normalizer.hpp"
#include "rvclt/variance.hpp"

using namespace rvclt;

TEST_SUITE_BEGIN("diagnostics");

TEST_CASE("block scheme choices") {
  const auto iid = ModelSpec::iid(TailSpec::pareto2());
  const auto s1 = choose_block_scheme(iid, 1000000, 0.5);
  CHECK(s1.r_n == 52);  // ceil((log 1e6)^1.5)
  CHECK(s1.k_n == 1000000 / 52);
  CHECK(s1.rule == BlockRule::log_power);

  const auto ma = ModelSpec::finite_ma({1.0, 0.5, 0.25, 0.125}, TailSpec::pareto2());
  const auto s2 = choose_block_scheme(ma, 100, 0.5);
  CHECK(s2.r_n >= 4);  // clipped to m + 1
  CHECK(s2.r_n <= 10);  // clipped to n / 10

  const auto kg =
      ModelSpec::sre_kesten_goldie(ALaw::kesten_goldie_log_normal(0.5), BLaw::constant(1.0));
  const auto s3 = choose_block_scheme(kg, 1000000, 0.5, 0.5);
  CHECK(s3.r_n == 14);  // exponent (1-eps)/delta = 1 -> ceil(log n)
  CHECK(s3.rule == BlockRule::remark_rem4x);

  CHECK_THROWS_AS((void)choose_block_scheme(iid, 50, 0.5), std::invalid_argument);
  CHECK_THROWS_AS((void)BlockScheme::manual(10, 20), std::invalid_argument);
}

TEST_CASE("petrov conditions on a light-tailed control are classical") {
  // iid standard normal with a_n = sqrt(n): truncation is inactive, the
  // truncated block variance is 1 for every eps, and the tail mass vanishes.
  const auto stub = ModelSpec::stub([](RngStream& rng) { return rng.normal(); });
  const std::size_t n = 10000;
  const auto scheme = choose_block_scheme(stub, n, 0.5);
  const std::vector<double> eps{0.25, 0.5, 1.0};
  const auto rep = petrov_conditions(stub, scheme, std::sqrt(static_cast<double>(n)), eps,
                                     50000, 101);
  CHECK(rep.cond_a.value == 0.0);
  for (const auto& b : rep.cond_b) {
    CHECK(b.value == doctest::Approx(1.0).epsilon(0.05));
  }
  CHECK(std::abs(rep.cond_c.value) <= 3.0 * rep.cond_c.stderr_);
}

TEST_CASE("petrov tail condition decreases along n for iid pareto2") {
  const TailSpec noise = TailSpec::pareto2(0.5, 1.0);
  const auto model = ModelSpec::iid(noise);
  std::vector<double> cond_a;
  const std::vector<double> eps{1.0};
  const std::size_t reps[2] = {2000000, 12000000};
  const double ns[2] = {1e4, 1e5};
  for (int i = 0; i < 2; ++i) {
    const auto n = static_cast<std::size_t>(ns[i]);
    const auto scheme = choose_block_scheme(model, n, 0.5);
    const double a_n = solve_a_n(noise, ns[i]);
    const auto rep = petrov_conditions(model, scheme, a_n, eps, reps[i], 103);
    cond_a.push_back(rep.cond_a.value);
    // co-vanishing with n P(|X| > a_n), within MC noise
    CHECK(rep.cond_a.value ==
          doctest::Approx(ns[i] * noise.abs_tail_probability(a_n)).epsilon(0.35));
  }
  CHECK(cond_a[1] < cond_a[0]);
}

TEST_CASE("symmetric model has vanishing truncated block mean") {
  const TailSpec noise = TailSpec::pareto2(0.5, 1.0);
  const auto sv = ModelSpec::stoch_vol({1.0, 0.5}, noise);
  const std::size_t n = 10000;
  const auto scheme = choose_block_scheme(sv, n, 0.5);
  const double a_n = closed_form_a_n(sv, static_cast<double>(n));
  const std::vector<double> eps{1.0};
  const auto rep = petrov_conditions(sv, scheme, a_n, eps, 40000, 107);
  CHECK(std::abs(rep.cond_c.value) <= 2.0 * rep.cond_c.stderr_);
}

TEST_CASE("ld scan for iid with unit blocks recovers the marginal") {
  const TailSpec noise = TailSpec::pareto2(0.5, 1.0);
  const auto model = ModelSpec::iid(noise);
  const std::vector<double> levels{1e-2, 1e-3};
  const auto scan = ld_ratio_scan(
      model, 1, levels, [&](double y) { return noise.abs_tail_probability(y); }, 1.0, 200000,
      109);
  for (const auto& p : scan.points) {
    CHECK(p.ratio == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::abs(p.ratio - 1.0) <= 4.0 * p.stderr_ + 1e-9);
  }
}

TEST_CASE("ld scan flags infeasible levels") {
  const auto model = ModelSpec::iid(TailSpec::pareto2());
  const std::vector<double> levels{1e-5};
  CHECK_THROWS_AS((void)ld_ratio_scan(
                      model, 10, levels, [](double) { return 1.0; }, 1.0, 1000, 1),
                  std::invalid_argument);
}

TEST_CASE("kesten-goldie ld ratio at r = 1000 sits at the oracle plateau") {
  // MC oracle value: the ratio has only reached about half of c0 at this
  // block length (the LD constant converges logarithmically).
  const ALaw a_law = ALaw::kesten_goldie_log_normal(0.5);
  const auto kg = ModelSpec::sre_kesten_goldie(a_law, BLaw::constant(1.0));
  const KgConstants kc = kg_constants(a_law, BLaw::constant(1.0));
  const std::vector<double> levels{1e-2, 1e-3};
  const auto scan = ld_ratio_scan(
      kg, 1000, levels, [&](double y) { return kc.c_infinity / (y * y); }, kc.c0, 200000, 113);
  for (const auto& p : scan.points) {
    CHECK(p.ratio > 0.40 * kc.c0);
    CHECK(p.ratio < 0.70 * kc.c0);
    CHECK_FALSE(p.extrapolating);  // the scan reaches the admissible region
  }
}

TEST_CASE("grey ld ratio at r = 1000 matches c0 = 3 within the window") {
  const auto grey = ModelSpec::sre_grey(ALaw::constant(0.5), TailSpec::pareto2(1.0, 1.0));
  const GgConstants gc = gg_constants(ALaw::constant(0.5));
  const std::vector<double> levels{1e-2, 1e-3};
  const auto scan = ld_ratio_scan(
      grey, 1000, levels,
      [&](double y) { return gc.tail_equiv * TailSpec::pareto2(1.0, 1.0).abs_tail_probability(y); },
      gc.c0, 200000, 127);
  for (const auto& p : scan.points) {
    CHECK(p.ratio > 0.5 * gc.c0);
    CHECK(p.ratio < 1.5 * gc.c0);
    CHECK(p.grey_region_delta > 0.0);
  }
}

TEST_CASE("mixing discrepancy is statistically zero for iid sums") {
  const TailSpec noise = TailSpec::pareto2(0.5, 1.0);
  const auto model = ModelSpec::iid(noise);
  const std::size_t n = 10000;
  const auto scheme = choose_block_scheme(model, n, 0.5);
  const double a_n = solve_a_n(noise, static_cast<double>(n));
  const auto u_grid = default_u_grid();
  const auto rep = mixing_cf_check(model, n, scheme, a_n, u_grid, 4000, 1500000, 131);
  for (const auto& p : rep.points) CHECK(p.discrepancy <= 3.0 * p.stderr_ + 0.01);
}

TEST_CASE("mixing: pathological block length r = m is visibly worse") {
  const TailSpec noise = TailSpec::pareto2(0.5, 1.0);
  const auto ma = ModelSpec::finite_ma({1.0, 1.0}, noise);
  const std::size_t n = 100000;
  const double a_n = solve_a_n(noise, static_cast<double>(n));  // scale only
  const auto u_grid = default_u_grid();
  const auto good = mixing_cf_check(ma, n, choose_block_scheme(ma, n, 0.5), a_n, u_grid, 2000,
                                    3000000, 137);
  const auto bad =
      mixing_cf_check(ma, n, BlockScheme::manual(n, 1), a_n, u_grid, 2000, 3000000, 137);
  CHECK(good.max_discrepancy < 0.05);
  CHECK(bad.max_discrepancy > 2.0 * good.max_discrepancy);
}

TEST_CASE("moment growth: deterministic stub has slope exactly 2 - delta") {
  const auto stub = ModelSpec::stub([](RngStream&) { return 1.0; }, 0.0);
  const std::vector<double> n_grid{1e2, 1e3, 1e4};
  const auto rep = moment_growth(stub, n_grid, 0.1, 200, 139);
  CHECK(rep.gamma_hat == doctest::Approx(1.9).epsilon(1e-10));
  for (double r : rep.residuals) CHECK(std::abs(r) < 1e-9);
}

TEST_CASE("moment growth: iid pareto2 grows nearly linearly") {
  const auto model = ModelSpec::iid(TailSpec::pareto2());
  const std::vector<double> n_grid{1e3, 3e3, 1e4, 3e4};
  const auto rep = moment_growth(model, n_grid, 0.1, 3000, 149);
  CHECK(rep.gamma_hat > 0.85);
  CHECK(rep.gamma_hat < 1.15);
}

TEST_CASE("moment growth: stochastic volatility stays below 1.2") {
  const auto sv = ModelSpec::stoch_vol({1.0, 0.5}, TailSpec::pareto2());
  const std::vector<double> n_grid{1e3, 3e3, 1e4};
  const auto rep = moment_growth(sv, n_grid, 0.1, 1500, 151);
  CHECK(rep.gamma_hat <= 1.2);
}

TEST_SUITE_END();
