#include "rvclt/gof.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "rvclt/parallel.hpp"

namespace rvclt {

std::string to_string(StatKind kind) {
  switch (kind) {
    case StatKind::normalized_sum: return "NormalizedSum";
    case StatKind::studentized_sum: return "StudentizedSum";
    case StatKind::multiplier_sum: return "MultiplierSum";
    case StatKind::quadratic_vn2: return "QuadraticVn2";
  }
  return "?";
}

std::string SumSample::to_csv() const {
  std::string out = "# rvclt-schema v1\n";
  char line[256];
  std::snprintf(line, sizeof line, "# statistic_kind=%s n=%.17g a_n=%.17g d_n=%.17g seed=%llu\n",
                to_string(kind).c_str(), n, a_n, d_n,
                static_cast<unsigned long long>(seed));
  out += line;
  out += "replicate,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.17g\n", i, values[i]);
    out += line;
  }
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
  }
  return std::min(std::max(q, 0.0), 1.0);
}

SumSample normalized_sums(const ModelSpec& model, std::size_t n, double a_n, double d_n,
                          std::size_t replicates, std::uint64_t master_seed) {
  if (!(a_n > 0.0)) throw std::invalid_argument("normalized_sums: a_n must be positive");
  if (replicates == 0) throw std::invalid_argument("normalized_sums: no replicates");
  SumSample out;
  out.kind = StatKind::normalized_sum;
  out.n = static_cast<double>(n);
  out.a_n = a_n;
  out.d_n = d_n;
  out.seed = master_seed;
  out.values.resize(replicates);
  parallel_for(replicates, [&](std::size_t rep) {
    PathGenerator gen(model, RngStream(master_seed, Stage::normalized_sums, n, rep));
    double s = 0.0;
    for (std::size_t t = 0; t < n; ++t) s += gen.next();
    out.values[rep] = (s - d_n) / a_n;
  });
  return out;
}

SumSample studentized_sums(const ModelSpec& model, std::size_t n, std::size_t replicates,
                           std::uint64_t master_seed) {
  if (replicates == 0) throw std::invalid_argument("studentized_sums: no replicates");
  SumSample out;
  out.kind = StatKind::studentized_sum;
  out.n = static_cast<double>(n);
  out.seed = master_seed;
  std::vector<double> raw(replicates);
  parallel_for(replicates, [&](std::size_t rep) {
    PathGenerator gen(model, RngStream(master_seed, Stage::studentized_sums, n, rep));
    double s = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double x = gen.next();
      s += x;
      sq += x * x;
    }
    raw[rep] = sq > 0.0 ? s / std::sqrt(sq) : std::numeric_limits<double>::quiet_NaN();
  });
  out.values.reserve(replicates);
  for (double v : raw) {
    if (std::isnan(v))
      ++out.excluded;
    else
      out.values.push_back(v);
  }
  return out;
}

MultiplierCheck multiplier_check(const ModelSpec& model, std::size_t n, double a_n,
                                 std::size_t replicates, std::uint64_t master_seed) {
  if (!(a_n > 0.0)) throw std::invalid_argument("multiplier_check: a_n must be positive");
  MultiplierCheck out;
  for (SumSample* s : {&out.vn2_sample, &out.multiplier_sample}) {
    s->n = static_cast<double>(n);
    s->a_n = a_n;
    s->seed = master_seed;
    s->values.resize(replicates);
  }
  out.vn2_sample.kind = StatKind::quadratic_vn2;
  out.multiplier_sample.kind = StatKind::multiplier_sum;
  parallel_for(replicates, [&](std::size_t rep) {
    PathGenerator gen(model, RngStream(master_seed, Stage::multiplier, n, rep));
    // Independent multiplier stream: same replicate index, different stage.
    RngStream multiplier_rng(master_seed, Stage::multiplier_noise, n, rep);
    double sq = 0.0, dot = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double x = gen.next();
      sq += x * x;
      dot += x * multiplier_rng.normal();
    }
    out.vn2_sample.values[rep] = sq / (a_n * a_n);
    out.multiplier_sample.values[rep] = dot / a_n;
  });
  return out;
}

GoFReport ks_test(const SumSample& sample, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("ks_test: sigma2 must be positive");
  if (sample.values.empty()) throw std::invalid_argument("ks_test: empty sample");
  GoFReport report;
  report.target_sigma2 = sigma2;
  report.sample_size = sample.values.size();
  std::vector<double> sorted = sample.values;
  std::sort(sorted.begin(), sorted.end());
  const double sigma = std::sqrt(sigma2);
  const double n = static_cast<double>(sorted.size());
  double ks = 0.0;
  double ad = -n;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double z = normal_cdf(sorted[i] / sigma);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    ks = std::max({ks, z - lo, hi - z});
    const double z_rev = normal_cdf(sorted[sorted.size() - 1 - i] / sigma);
    const double safe = 1e-300;
    ad -= (2.0 * static_cast<double>(i) + 1.0) / n *
          (std::log(std::max(z, safe)) + std::log(std::max(1.0 - z_rev, safe)));
  }
  report.ks_statistic = ks;
  report.ks_pvalue = kolmogorov_tail(std::sqrt(n) * ks);
  report.ad_statistic = ad;
  return report;
}

std::vector<std::pair<double, double>> qq_export(const SumSample& sample, double sigma2) {
  if (sample.values.empty()) throw std::invalid_argument("qq_export: empty sample");
  std::vector<double> sorted = sample.values;
  std::sort(sorted.begin(), sorted.end());
  const double sigma = std::sqrt(sigma2);
  std::vector<std::pair<double, double>> table;
  table.reserve(199);
  for (int k = 1; k <= 199; ++k) {
    const double p = 0.005 * k;
    // Rational approximation of the normal quantile (Acklam), refined by one
    // Newton step against erfc-based cdf; plenty for plotting tables.
    double q = 0.0;
    {
      const double a1 = -3.969683028665376e+01, a2 = 2.209460984245205e+02,
                   a3 = -2.759285104469687e+02, a4 = 1.383577518672690e+02,
                   a5 = -3.066479806614716e+01, a6 = 2.506628277459239e+00;
      const double b1 = -5.447609879822406e+01, b2 = 1.615858368580409e+02,
                   b3 = -1.556989798598866e+02, b4 = 6.680131188771972e+01,
                   b5 = -1.328068155288572e+01;
      const double c1 = -7.784894002430293e-03, c2 = -3.223964580411365e-01,
                   c3 = -2.400758277161838e+00, c4 = -2.549732539343734e+00,
                   c5 = 4.374664141464968e+00, c6 = 2.938163982698783e+00;
      const double d1 = 7.784695709041462e-03, d2 = 3.224671290700398e-01,
                   d3 = 2.445134137142996e+00, d4 = 3.754408661907416e+00;
      const double plow = 0.02425;
      if (p < plow) {
        const double u = std::sqrt(-2.0 * std::log(p));
        q = (((((c1 * u + c2) * u + c3) * u + c4) * u + c5) * u + c6) /
            ((((d1 * u + d2) * u + d3) * u + d4) * u + 1.0);
      } else if (p <= 1.0 - plow) {
        const double u = p - 0.5, t = u * u;
        q = (((((a1 * t + a2) * t + a3) * t + a4) * t + a5) * t + a6) * u /
            (((((b1 * t + b2) * t + b3) * t + b4) * t + b5) * t + 1.0);
      } else {
        const double u = std::sqrt(-2.0 * std::log(1.0 - p));
        q = -(((((c1 * u + c2) * u + c3) * u + c4) * u + c5) * u + c6) /
            ((((d1 * u + d2) * u + d3) * u + d4) * u + 1.0);
      }
      const double err = normal_cdf(q) - p;
      q -= err * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(q * q / 2.0);
    }
    const double rank = p * static_cast<double>(sorted.size());
    const std::size_t idx =
        std::min(sorted.size() - 1, static_cast<std::size_t>(std::max(rank - 0.5, 0.0)));
    table.emplace_back(sigma * q, sorted[idx]);
  }
  return table;
}

TruncatedMoments truncated_moments(std::span<const double> values, double target_location,
                                   double target_scale, double cut_sigmas) {
  if (!(target_scale > 0.0))
    throw std::invalid_argument("truncated_moments: target scale must be positive");
  TruncatedMoments out;
  const double cut = cut_sigmas * target_scale;
  double sum = 0.0;
  for (double v : values) {
    if (std::abs(v - target_location) <= cut) {
      sum += v;
      ++out.used;
    } else {
      ++out.excluded;
    }
  }
  if (out.used < 2) throw std::runtime_error("truncated_moments: fewer than two survivors");
  out.mean = sum / static_cast<double>(out.used);
  double ss = 0.0;
  for (double v : values)
    if (std::abs(v - target_location) <= cut) ss += (v - out.mean) * (v - out.mean);
  out.variance = ss / static_cast<double>(out.used - 1);
  return out;
}

double plain_variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("plain_variance: need >= 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

}  // namespace rvclt
