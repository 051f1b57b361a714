#ifndef RVCLT_TAIL_HPP
#define RVCLT_TAIL_HPP

#include <functional>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "rvclt/rng.hpp"

namespace rvclt {

// Two-sided Pareto tail with index 2: P(|X|>x) = (r/x)^2 for x >= r, and
// P(X>x)/P(|X|>x) -> p_plus. Exact at every x, not just asymptotically.
struct Pareto2 {
  double p_plus = 0.5;
  double r = 1.0;
};

// Symmetric density c_r |x|^-3 (1 + a cos(th0 log|x|) + b sin(th0 log|x|)) on
// |x| > r. The tail is x^-2 times an oscillating factor, so it is not
// regularly varying, yet the truncated second moment is slowly varying and
// the Gaussian CLT still holds.
class OscillatingDensity {
 public:
  OscillatingDensity(double a, double b, double theta0, double r);

  double a() const { return a_; }
  double b() const { return b_; }
  double theta0() const { return theta0_; }
  double r() const { return r_; }
  double C() const { return C_; }
  double D() const { return D_; }
  double c_r() const { return c_r_; }

  // N(y) = 1 + C cos(th0 log y) + D sin(th0 log y); P(X>y) = (c_r/2) y^-2 N(y).
  double modulation(double y) const;
  double density(double x) const;

 private:
  double a_, b_, theta0_, r_;
  double C_, D_, c_r_;
  double k_const_;  // anchors K(r) = 0
  friend class TailSpec;
};

// Marginal tail estimated from a sample; backs the SRE marginals where no
// closed form exists. Stores order statistics of |X| plus prefix sums of X^2.
class EmpiricalTail {
 public:
  explicit EmpiricalTail(std::span<const double> sample);

  // Log-spaced histogram summary; trades the per-sample resolution of the
  // sorted representation for O(bins) memory, so the presample can be large.
  static EmpiricalTail from_stream(const std::function<double()>& draw, std::size_t count,
                                   std::size_t bins = 8192);

  double abs_tail_probability(double x) const;  // P(|X| > x)
  double truncated_second_moment(double x) const;
  double min_abs() const;
  std::size_t size() const { return total_; }

 private:
  EmpiricalTail() = default;
  std::vector<double> abs_sorted_;
  std::vector<double> sq_prefix_;  // sq_prefix_[i] = sum_{j<i} abs_sorted_[j]^2
  std::size_t total_ = 0;
  // histogram mode
  bool hist_ = false;
  double log_lo_ = 0.0, log_hi_ = 0.0;
  std::vector<double> bin_count_, bin_sq_;  // suffix count / prefix sum of squares
};

// (1/N) sum X_i^2 1(|X_i| <= x).
double empirical_K(std::span<const double> sample, double x);

// One marginal/noise distribution used across the model families.
class TailSpec {
 public:
  TailSpec(Pareto2 p);                                 // NOLINT(google-explicit-constructor)
  TailSpec(OscillatingDensity d);                      // NOLINT(google-explicit-constructor)
  explicit TailSpec(std::shared_ptr<const EmpiricalTail> emp);

  static TailSpec pareto2(double p_plus = 0.5, double r = 1.0) {
    return TailSpec(Pareto2{p_plus, r});
  }
  static TailSpec oscillating(double a, double b, double theta0, double r) {
    return TailSpec(OscillatingDensity(a, b, theta0, r));
  }

  bool is_pareto2() const { return std::holds_alternative<Pareto2>(spec_); }
  bool is_oscillating() const { return std::holds_alternative<OscillatingDensity>(spec_); }
  bool is_empirical() const;
  const Pareto2& pareto2_params() const { return std::get<Pareto2>(spec_); }
  const OscillatingDensity& oscillating_params() const {
    return std::get<OscillatingDensity>(spec_);
  }

  double sample(RngStream& rng) const;

  // One-sided tail P(X > y), y >= r (closed form).
  double tail_probability(double y) const;
  // Two-sided tail P(|X| > y) entering Eq (3)-type equations.
  double abs_tail_probability(double y) const;
  // K(x) = E[X^2 1(|X| <= x)], anchored so K(r) = 0 on the actual support.
  double truncated_second_moment(double x) const;

  double support_threshold() const;  // r (min |X| for empirical)
  double mean() const;               // exists since the tail index is 2
  bool symmetric() const;

 private:
  std::variant<Pareto2, OscillatingDensity, std::shared_ptr<const EmpiricalTail>> spec_;
};

}  // namespace rvclt

#endif  // RVCLT_TAIL_HPP
