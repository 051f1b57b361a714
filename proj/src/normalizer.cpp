#include "rvclt/normalizer.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rvclt/variance.hpp"

namespace rvclt {

std::string to_string(AnSource source) {
  switch (source) {
    case AnSource::eq3_exact: return "Eq3Exact";
    case AnSource::eq3a_fixed_point: return "Eq3aFixedPoint";
    case AnSource::closed_form_kg: return "ClosedFormKG";
    case AnSource::closed_form_sv: return "ClosedFormSV";
    case AnSource::empirical_k: return "EmpiricalK";
  }
  return "?";
}

double defining_residual(const TailSpec& tail, double n, double a) {
  return n * tail.abs_tail_probability(a) +
         n / (a * a) * tail.truncated_second_moment(a) - 1.0;
}

double solve_a_n(const TailSpec& tail, double n) {
  if (!(n >= 10.0))
    throw std::invalid_argument("solve_a_n: n >= 10 required (h degenerates near n = 1)");
  const double r = tail.support_threshold();
  if (!(r > 0.0)) throw std::invalid_argument("solve_a_n: empty support");

  // Bracket [sqrt(n) eps0, n M0], expanded geometrically until h changes sign.
  double lo = std::max(std::sqrt(n) * 1e-3, r * (1.0 + 1e-12));
  double hi = std::max(n, lo * 2.0);
  int doublings = 0;
  while (defining_residual(tail, n, lo) < 0.0) {
    hi = lo;
    lo = std::max(lo / 2.0, r * (1.0 + 1e-12));
    if (++doublings > 200 || lo == r * (1.0 + 1e-12))
      break;
  }
  doublings = 0;
  while (defining_residual(tail, n, hi) > 0.0) {
    hi *= 2.0;
    if (++doublings > 200)
      throw std::runtime_error(
          "solve_a_n: bracket expansion failed; K does not grow as required");
  }
  if (defining_residual(tail, n, lo) < 0.0)
    throw std::runtime_error("solve_a_n: no sign change on the bracket");

  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (defining_residual(tail, n, mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double root = 0.5 * (lo + hi);
  // An empirical K is a step function, so h jumps across zero at data atoms
  // and only the exact families can meet the analytic residual tolerance.
  if (!tail.is_empirical() && std::abs(defining_residual(tail, n, root)) > 1e-10)
    throw std::runtime_error("solve_a_n: residual tolerance 1e-10 not met");
  return root;
}

NormalizingSequence build_sequence(const TailSpec& tail, std::span<const double> ns,
                                   AnSource source) {
  NormalizingSequence seq;
  seq.source = source;
  seq.entries.reserve(ns.size());
  for (double n : ns) {
    NormalizingEntry e;
    e.n = n;
    e.a_n = solve_a_n(tail, n);
    e.ell = e.a_n / std::sqrt(n);
    e.residual = defining_residual(tail, n, e.a_n);
    seq.entries.push_back(e);
  }
  return seq;
}

std::string NormalizingSequence::to_csv() const {
  std::string out = "# rvclt-schema v1\nn,a_n,ell_n,residual,source\n";
  char line[256];
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%s\n", e.n, e.a_n, e.ell,
                  e.residual, rvclt::to_string(source).c_str());
    out += line;
  }
  return out;
}

double closed_form_a_n(const ModelSpec& model, double n) {
  const auto& v = model.variant();
  if (const auto* kg = std::get_if<ModelSpec::SreKestenGoldie>(&v)) {
    const KgConstants c = kg_constants(kg->a_law, kg->b_law);
    return std::sqrt(c.c_infinity * n * std::log(n));
  }
  if (const auto* sv = std::get_if<ModelSpec::StochVol>(&v)) {
    double sum_sq = 0.0;
    for (double p : sv->psi) sum_sq += p * p;
    const double e_sigma_sq = std::exp(2.0 * sum_sq);
    return std::sqrt(e_sigma_sq) * solve_a_n(sv->noise, n);
  }
  throw std::invalid_argument(
      "closed_form_a_n: only the Kesten-Goldie SRE and the stochastic "
      "volatility model have closed forms");
}

}  // namespace rvclt
