#ifndef RVCLT_GOF_HPP
#define RVCLT_GOF_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rvclt/models.hpp"
#include "rvclt/rng.hpp"

namespace rvclt {

enum class StatKind { normalized_sum, studentized_sum, multiplier_sum, quadratic_vn2 };

std::string to_string(StatKind kind);

// Replicate statistics from independent stationary paths.
struct SumSample {
  std::vector<double> values;
  StatKind kind = StatKind::normalized_sum;
  double n = 0.0;
  double a_n = 1.0;
  double d_n = 0.0;
  std::uint64_t seed = 0;
  std::size_t excluded = 0;  // degenerate replicates (V_n = 0), counted not kept

  std::string to_csv() const;
};

struct GoFReport {
  double ks_statistic = 0.0;
  double ks_pvalue = 0.0;
  double ad_statistic = 0.0;
  double target_sigma2 = 0.0;
  std::size_t sample_size = 0;
};

double normal_cdf(double x);
// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2k^2 lambda^2),
// truncated at 100 terms (truncation error < 1e-10).
double kolmogorov_tail(double lambda);

// Replicate values (S_n - d_n)/a_n from fresh stationary paths.
SumSample normalized_sums(const ModelSpec& model, std::size_t n, double a_n, double d_n,
                          std::size_t replicates, std::uint64_t master_seed);

// Replicate values S_n / V_n with V_n = (sum X_t^2)^{1/2}; self-normalizing,
// no a_n required. Replicates with V_n = 0 are excluded and counted.
SumSample studentized_sums(const ModelSpec& model, std::size_t n, std::size_t replicates,
                           std::uint64_t master_seed);

// Per replicate, from the same path: V_n^2/a_n^2 and sum X_t N_t / a_n with
// fresh independent standard normal multipliers N_t. The two convergences are
// equivalent, which is what the joint criterion checks.
struct MultiplierCheck {
  SumSample vn2_sample;        // quadratic_vn2
  SumSample multiplier_sample; // multiplier_sum
};
MultiplierCheck multiplier_check(const ModelSpec& model, std::size_t n, double a_n,
                                 std::size_t replicates, std::uint64_t master_seed);

// One-sample KS against N(0, sigma2), exact statistic, asymptotic p-value;
// Anderson-Darling A^2 computed alongside.
GoFReport ks_test(const SumSample& sample, double sigma2);

// Percentile pairs (theoretical, empirical) at 0.5%, 1%, ..., 99.5%.
std::vector<std::pair<double, double>> qq_export(const SumSample& sample, double sigma2);

// Moment estimates excluding replicates farther than `cut_sigmas` target
// standard deviations from the target location. At tail index 2 the plain
// sample variance has unbounded sampling error (E[V^2] is infinite at every
// finite n), so tolerance windows are only meaningful for the truncated
// moments; this is the same truncation device the block diagnostics use.
struct TruncatedMoments {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};
TruncatedMoments truncated_moments(std::span<const double> values, double target_location,
                                   double target_scale, double cut_sigmas = 5.0);

double plain_variance(std::span<const double> values);

}  // namespace rvclt

#endif  // RVCLT_GOF_HPP
