#ifndef RVCLT_NORMALIZER_HPP
#define RVCLT_NORMALIZER_HPP

#include <span>
#include <string>
#include <vector>

#include "rvclt/models.hpp"
#include "rvclt/tail.hpp"

namespace rvclt {

// Where a normalizing value came from.
enum class AnSource { eq3_exact, eq3a_fixed_point, closed_form_kg, closed_form_sv, empirical_k };

std::string to_string(AnSource source);

// a_n is the unique root of h(a) = n P(|X|>a) + (n/a^2) K(a) - 1. h is
// strictly decreasing wherever K > 0 (h'(a) = -2 n K(a)/a^3), so bisection is
// unconditionally convergent. Residual after the solve is below 1e-10.
double solve_a_n(const TailSpec& tail, double n);

// Residual h(a) of the defining equation; exposed so callers can audit.
double defining_residual(const TailSpec& tail, double n, double a);

struct NormalizingEntry {
  double n = 0.0;
  double a_n = 0.0;
  double ell = 0.0;       // a_n / sqrt(n)
  double residual = 0.0;  // h(a_n); 0 for closed forms
};

struct NormalizingSequence {
  std::vector<NormalizingEntry> entries;
  AnSource source = AnSource::eq3_exact;

  // CSV with the schema header line "# rvclt-schema v1".
  std::string to_csv() const;
};

NormalizingSequence build_sequence(const TailSpec& tail, std::span<const double> ns,
                                   AnSource source = AnSource::eq3_exact);

// Closed-form shortcuts: sqrt(c_inf n log n) for the Kesten-Goldie SRE and
// sqrt(E[sigma_0^2]) a_n^Z for the stochastic volatility model, with
// E[sigma_0^2] = exp(2 sum psi_j^2) under standard normal eta.
double closed_form_a_n(const ModelSpec& model, double n);

}  // namespace rvclt

#endif  // RVCLT_NORMALIZER_HPP
