#include "rvclt/variance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rvclt/parallel.hpp"

namespace rvclt {

SpectralTailLaw SpectralTailLaw::linear(std::vector<double> psi, double p_plus) {
  if (psi.empty()) throw std::invalid_argument("spectral law: empty psi");
  if (psi.front() == 0.0)
    throw std::invalid_argument("spectral law: psi_0 must be nonzero so |Theta_0| = 1");
  SpectralTailLaw law;
  law.m_ = static_cast<int>(psi.size()) - 1;
  law.law_ = Linear{std::move(psi), p_plus};
  return law;
}

SpectralTailLaw SpectralTailLaw::sampler(int m, Sampler draw) {
  if (m < 0 || !draw) throw std::invalid_argument("spectral law: bad sampler");
  SpectralTailLaw law;
  law.m_ = m;
  law.law_ = std::move(draw);
  return law;
}

bool SpectralTailLaw::enumerable() const {
  // Linear support: (m+1) shift atoms x 2 signs. The MC path exists for
  // user-supplied laws; 1e4 atoms is the enumeration cutoff.
  if (!std::holds_alternative<Linear>(law_)) return false;
  return 2 * (m_ + 1) <= 10000;
}

double SpectralTailLaw::enumerate_sigma2() const {
  const auto& lin = std::get<Linear>(law_);
  const auto& psi = lin.psi;
  double norm_sq = 0.0;
  for (double p : psi) norm_sq += p * p;
  if (norm_sq == 0.0) throw std::invalid_argument("spectral law: psi is all zero");
  // Theta_t = Theta_Z psi_{J+t}/|psi_J|; the indicator needs psi_{J-i} = 0
  // for i = 1..m (psi_j = 0 outside [0, m]). The sign Theta_Z squares away.
  double sigma2 = 0.0;
  const int m = m_;
  for (int j = 0; j <= m; ++j) {
    if (psi[j] == 0.0) continue;  // not an atom of J
    bool back_zero = true;
    for (int i = 1; i <= m && back_zero; ++i) {
      const int idx = j - i;
      if (idx >= 0 && psi[idx] != 0.0) back_zero = false;
    }
    if (!back_zero) continue;
    double fwd = 0.0;
    for (int t = 0; t <= m; ++t) {
      const int idx = j + t;
      if (idx <= m) fwd += psi[idx];
    }
    const double weight = psi[j] * psi[j] / norm_sq;  // P(J = j)
    sigma2 += weight * (fwd * fwd) / (psi[j] * psi[j]);
  }
  return sigma2;
}

void SpectralTailLaw::draw(RngStream& rng, std::span<double> theta) const {
  if (theta.size() != static_cast<std::size_t>(2 * m_ + 1))
    throw std::invalid_argument("spectral law: window size mismatch");
  if (const auto* lin = std::get_if<Linear>(&law_)) {
    const auto& psi = lin->psi;
    double norm_sq = 0.0;
    for (double p : psi) norm_sq += p * p;
    double u = rng.uniform() * norm_sq;
    int j = 0;
    for (; j < m_; ++j) {
      u -= psi[j] * psi[j];
      if (u < 0.0) break;
    }
    const double sign = rng.uniform() < lin->p_plus ? 1.0 : -1.0;
    for (int t = -m_; t <= m_; ++t) {
      const int idx = j + t;
      theta[t + m_] = (idx >= 0 && idx <= m_) ? sign * psi[idx] / std::abs(psi[j]) : 0.0;
    }
    return;
  }
  std::get<Sampler>(law_)(rng, theta);
}

VarianceReport sigma2_m_dependent(const SpectralTailLaw& law, std::uint64_t mc_draws,
                                  std::uint64_t seed) {
  VarianceReport report;
  if (law.enumerable()) {
    report.sigma2 = law.enumerate_sigma2();
    report.method = VarianceMethod::spectral_enumeration;
    return report;
  }
  const int m = law.window();
  RngStream rng(seed, Stage::spectral_mc, static_cast<std::uint64_t>(m), 0);
  std::vector<double> theta(2 * m + 1);
  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t i = 0; i < mc_draws; ++i) {
    law.draw(rng, theta);
    bool back_zero = true;
    for (int t = 1; t <= m && back_zero; ++t)
      if (theta[m - t] != 0.0) back_zero = false;
    double val = 0.0;
    if (back_zero) {
      double fwd = 0.0;
      for (int t = 0; t <= m; ++t) fwd += theta[m + t];
      val = fwd * fwd;
    }
    sum += val;
    sum_sq += val * val;
  }
  const double mean = sum / static_cast<double>(mc_draws);
  const double var = std::max(sum_sq / static_cast<double>(mc_draws) - mean * mean, 0.0);
  report.sigma2 = mean;
  report.method = VarianceMethod::spectral_mc;
  report.mc_stderr = std::sqrt(var / static_cast<double>(mc_draws));
  return report;
}

LinearSigma sigma2_linear(std::span<const double> psi) {
  double sum = 0.0, norm_sq = 0.0;
  for (double p : psi) {
    sum += p;
    norm_sq += p * p;
  }
  if (norm_sq == 0.0) throw std::invalid_argument("sigma2_linear: psi is all zero");
  LinearSigma out;
  out.paper.sigma2 = sum * sum / norm_sq;
  out.paper.convention = AnConvention::paper_an;
  out.noise.sigma2 = sum * sum;
  out.noise.convention = AnConvention::noise_an_z;
  return out;
}

SvSigma sigma2_sv(std::span<const double> psi) {
  double sum_sq = 0.0;
  for (double p : psi) sum_sq += p * p;
  SvSigma out;
  out.paper.sigma2 = 1.0;
  out.paper.convention = AnConvention::paper_an;
  out.noise.sigma2 = std::exp(2.0 * sum_sq);
  out.noise.convention = AnConvention::noise_an_z;
  return out;
}

KgConstants kg_constants(const ALaw& a_law, const BLaw& b_law) {
  KgConstants c;
  c.mean_a = a_law.mean();
  c.second_moment_a = a_law.second_moment();
  if (std::abs(c.second_moment_a - 1.0) > 1e-8)
    throw std::invalid_argument("kg_constants: E[A^2] = 1 fails");
  if (!(c.mean_a < 1.0))
    throw std::invalid_argument("kg_constants: E[A] >= 1, stationary mean does not exist");
  const double eb = b_law.mean();
  const double eb2 = b_law.second_moment();
  if (!(eb2 < std::numeric_limits<double>::infinity()))
    throw std::invalid_argument("kg_constants: E[B^2] must be finite");
  c.m2 = a_law.m2();
  if (!(c.m2 > 0.0)) throw std::invalid_argument("kg_constants: m2 must be positive");
  // A and B independent, so E[AB] = E[A]E[B].
  c.c_infinity =
      (eb2 * (1.0 - c.mean_a) + 2.0 * c.mean_a * eb * eb) / (2.0 * (1.0 - c.mean_a) * c.m2);
  c.c0 = (1.0 + c.mean_a) / ((1.0 - c.mean_a) * 2.0 * c.m2);
  c.mean_x = eb / (1.0 - c.mean_a);
  return c;
}

KgTailSplit kg_tail_split(const ModelSpec& kg_model, std::size_t sample_size,
                          double quantile, std::uint64_t seed) {
  if (!(quantile > 0.5 && quantile < 1.0))
    throw std::invalid_argument("kg_tail_split: quantile must lie in (0.5, 1)");
  auto path = simulate_path(kg_model, sample_size, RngStream(seed, Stage::marginal_sample, 0, 0));
  std::vector<double> abs_vals(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) abs_vals[i] = std::abs(path[i]);
  const std::size_t k = static_cast<std::size_t>(quantile * static_cast<double>(path.size()));
  std::nth_element(abs_vals.begin(), abs_vals.begin() + k, abs_vals.end());
  const double x = abs_vals[k];
  std::size_t above_plus = 0, above_minus = 0;
  for (double v : path) {
    if (v > x) ++above_plus;
    if (-v > x) ++above_minus;
  }
  const double inv_n = 1.0 / static_cast<double>(path.size());
  KgTailSplit split;
  split.c_plus = x * x * static_cast<double>(above_plus) * inv_n;
  split.c_minus = x * x * static_cast<double>(above_minus) * inv_n;
  const double p = static_cast<double>(above_plus + above_minus) * inv_n;
  split.mc_stderr = x * x * std::sqrt(p * inv_n);  // binomial, ignoring serial dependence
  return split;
}

GgConstants gg_constants(const ALaw& a_law) {
  const double ea = a_law.mean();
  const double ea2 = a_law.second_moment();
  if (!(ea2 < 1.0)) throw std::invalid_argument("gg_constants: E[A^2] < 1 required");
  GgConstants c;
  c.mean_c = 1.0 / (1.0 - ea);
  c.second_moment_c = (1.0 + ea) / ((1.0 - ea2) * (1.0 - ea));
  c.c0 = (1.0 + ea) / (1.0 - ea);
  c.tail_equiv = 1.0 / (1.0 - ea2);
  return c;
}

}  // namespace rvclt
