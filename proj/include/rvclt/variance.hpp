#ifndef RVCLT_VARIANCE_HPP
#define RVCLT_VARIANCE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "rvclt/models.hpp"
#include "rvclt/rng.hpp"

namespace rvclt {

enum class VarianceMethod { closed_form, spectral_enumeration, spectral_mc };
enum class AnConvention { paper_an, noise_an_z };

struct VarianceReport {
  double sigma2 = 0.0;
  VarianceMethod method = VarianceMethod::closed_form;
  double mc_stderr = 0.0;  // 0 for exact methods
  AnConvention convention = AnConvention::paper_an;
};

// Law of (Theta_{-m},...,Theta_m). |Theta_0| = 1 a.s. For a linear process
// Theta_t = Theta_Z psi_{J+t}/|psi_J| with P(J=j) = psi_j^2/||psi||^2, which
// has finite support and is enumerated exactly; arbitrary laws supply a
// sampler that fills a window of length 2m+1 and are integrated by MC.
class SpectralTailLaw {
 public:
  using Sampler = std::function<void(RngStream&, std::span<double>)>;

  static SpectralTailLaw linear(std::vector<double> psi, double p_plus = 0.5);
  static SpectralTailLaw sampler(int m, Sampler draw);

  int window() const { return m_; }
  bool enumerable() const;
  // Exact sum over atoms of E[(sum_{t>=0} Theta_t)^2 1(Theta_{-i} = 0, i=1..m)].
  double enumerate_sigma2() const;
  void draw(RngStream& rng, std::span<double> theta) const;  // size 2m+1

 private:
  SpectralTailLaw() = default;
  int m_ = 0;
  struct Linear {
    std::vector<double> psi;
    double p_plus;
  };
  std::variant<Linear, Sampler> law_;
};

// sigma^2 = E[(sum_{t=0..m} Theta_t)^2 1(Theta_{-i}=0, i=1..m)] for an
// m-dependent sequence; enumeration when the support is finite (switch at
// 1e4 atoms), Monte Carlo with reported standard error otherwise.
VarianceReport sigma2_m_dependent(const SpectralTailLaw& law,
                                  std::uint64_t mc_draws = 1000000,
                                  std::uint64_t seed = 1);

struct LinearSigma {
  VarianceReport paper;    // (sum psi)^2 / ||psi||^2 under the marginal a_n
  VarianceReport noise;    // (sum psi)^2 under a_n^Z
};
LinearSigma sigma2_linear(std::span<const double> psi);

struct SvSigma {
  VarianceReport paper;    // 1 under the marginal a_n
  VarianceReport noise;    // exp(2 sum psi^2) under a_n^Z
};
SvSigma sigma2_sv(std::span<const double> psi);

// Kesten-Goldie tail and CLT constants at alpha = 2 (A, B independent):
//   m2 = E[A^2 log A]
//   c_inf = (E[B^2](1-E[A]) + 2 E[A]E[B]E[B]) / (2 (1-E[A]) m2)
//   c0 = (1+E[A]) / ((1-E[A]) 2 m2)        (the B = 1 form)
//   EX = E[B]/(1-E[A])
struct KgConstants {
  double m2 = 0.0;
  double c_infinity = 0.0;
  double c0 = 0.0;
  double mean_x = 0.0;
  double mean_a = 0.0;
  double second_moment_a = 0.0;
};
KgConstants kg_constants(const ALaw& a_law, const BLaw& b_law);

// Monte-Carlo split of c_inf into c_+ and c_- (no closed form exists for the
// split; only the sum does). Estimated from x^2 P(+-X > x) at a deep quantile
// of a stationary sample.
struct KgTailSplit {
  double c_plus = 0.0;
  double c_minus = 0.0;
  double mc_stderr = 0.0;
};
KgTailSplit kg_tail_split(const ModelSpec& kg_model, std::size_t sample_size,
                          double quantile, std::uint64_t seed);

// Grincevicius-Grey constants: EC = 1/(1-E[A]), EC2 = (1+E[A]) /
// ((1-E[A^2])(1-E[A])), c0 = (1+E[A])/(1-E[A]), tail_equiv = 1/(1-E[A^2]).
struct GgConstants {
  double mean_c = 0.0;
  double second_moment_c = 0.0;
  double c0 = 0.0;
  double tail_equiv = 0.0;
};
GgConstants gg_constants(const ALaw& a_law);

}  // namespace rvclt

#endif  // RVCLT_VARIANCE_HPP
