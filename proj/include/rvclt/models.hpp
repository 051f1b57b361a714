#ifndef RVCLT_MODELS_HPP
#define RVCLT_MODELS_HPP

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rvclt/rng.hpp"
#include "rvclt/tail.hpp"

namespace rvclt {

// Law of the multiplier A in X_t = A_t X_{t-1} + B_t. A is R+-valued; every
// member has closed-form moments so E[A^2]=1 can be enforced exactly in the
// Kesten-Goldie regime.
class ALaw {
 public:
  struct LogNormal {
    double mu, s;
  };
  struct Discrete {
    std::vector<double> atoms, weights;
  };
  struct Constant {
    double c;
  };

  static ALaw log_normal(double mu, double s);
  // mu = -s^2 forces E[A^2] = 1 (the alpha = 2 Kesten-Goldie normalization).
  static ALaw kesten_goldie_log_normal(double s) { return log_normal(-s * s, s); }
  static ALaw discrete(std::vector<double> atoms, std::vector<double> weights);
  static ALaw constant(double c);

  double mean() const;                  // E[A]
  double second_moment() const;         // E[A^2]
  double m2() const;                    // E[A^2 log A]
  double moment(double beta) const;     // E[A^beta]
  double sample(RngStream& rng) const;
  const std::variant<LogNormal, Discrete, Constant>& law() const { return law_; }

 private:
  ALaw() = default;
  std::variant<LogNormal, Discrete, Constant> law_;
};

// Law of the additive term B. Constant for the Kesten-Goldie presets, a
// regularly varying TailSpec in the Grincevicius-Grey regime.
class BLaw {
 public:
  static BLaw constant(double c);
  static BLaw tail(TailSpec spec);

  double mean() const;
  // E[B^2]; +infinity for a tail-index-2 spec.
  double second_moment() const;
  double sample(RngStream& rng) const;
  bool is_constant() const { return std::holds_alternative<double>(law_); }
  double constant_value() const { return std::get<double>(law_); }
  const TailSpec* tail_spec() const { return std::get_if<TailSpec>(&law_); }

 private:
  BLaw() = default;
  std::variant<double, TailSpec> law_;
};

// Coefficient rule for the infinite-order linear process, realized by
// truncation. The geometric rule certifies absolute summability by |rho|<1.
class CoefficientRule {
 public:
  static CoefficientRule geometric(double ratio);
  static CoefficientRule explicit_vector(std::vector<double> psi);
  std::vector<double> coefficients(int m_trunc) const;
  double abs_sum_bound() const;
  const std::variant<double, std::vector<double>>& rule() const { return rule_; }

 private:
  CoefficientRule() = default;
  std::variant<double, std::vector<double>> rule_;
};

// One of the six stationary model families, plus an iid stub hook used by the
// diagnostics tests (deterministic paths, light-tailed controls).
class ModelSpec {
 public:
  struct Iid {
    TailSpec noise;
  };
  struct FiniteMa {
    std::vector<double> psi;  // psi[0] = 1, psi.back() != 0
    TailSpec noise;
  };
  struct LinearProcess {
    CoefficientRule rule;
    int m_trunc;
    TailSpec noise;
    std::vector<double> psi;  // expanded coefficients
  };
  struct StochVol {
    std::vector<double> psi;  // log-volatility weights, eta iid standard normal
    TailSpec noise;
  };
  struct SreKestenGoldie {
    ALaw a_law;
    BLaw b_law;
  };
  struct SreGrey {
    ALaw a_law;
    TailSpec b_tail;
  };
  struct IidStub {
    std::function<double(RngStream&)> draw;
    double mean = 0.0;
  };
  using Variant =
      std::variant<Iid, FiniteMa, LinearProcess, StochVol, SreKestenGoldie, SreGrey, IidStub>;

  static ModelSpec iid(TailSpec noise);
  static ModelSpec finite_ma(std::vector<double> psi, TailSpec noise);
  static ModelSpec linear_process(CoefficientRule rule, int m_trunc, TailSpec noise);
  static ModelSpec stoch_vol(std::vector<double> psi, TailSpec noise);
  static ModelSpec sre_kesten_goldie(ALaw a_law, BLaw b_law);
  // Skips the E[A^2]=1 validation; for fixed-point sanity tests only.
  static ModelSpec sre_kesten_goldie_unchecked(ALaw a_law, BLaw b_law);
  static ModelSpec sre_grey(ALaw a_law, TailSpec b_tail);
  static ModelSpec stub(std::function<double(RngStream&)> draw, double mean = 0.0);

  const Variant& variant() const { return model_; }
  ModelSpec with_burn_in(int burn_in) const;
  int effective_burn_in() const;  // override if set, else default_burn_in

  bool is_sre() const;
  bool symmetric() const;  // S_n symmetric for every n (studentized presets)
  const TailSpec* noise_tail() const;  // underlying iid noise where one exists

 private:
  explicit ModelSpec(Variant v) : model_(std::move(v)) {}
  Variant model_;
  std::optional<int> burn_in_override_;
};

// Burn-in after which the start-up transient is below 1e-8: the contraction
// factor sqrt(E[A^2]) per step for SREs (E[A] when E[A^2]=1), the window
// length for the moving-average families, zero for iid.
int default_burn_in(const ModelSpec& spec);

// d_n: n E[B]/(1-E[A]) for the SRE families, zero elsewhere (centered noise).
double centering_constant(const ModelSpec& spec, double n);

// Streams one stationary path value at a time; burn-in happens at
// construction. Owns its model spec and rng state, so temporaries are safe
// and copying replays the remainder of the path.
class PathGenerator {
 public:
  PathGenerator(ModelSpec spec, RngStream rng);
  PathGenerator(const PathGenerator&) = delete;  // states hold internal pointers
  PathGenerator(PathGenerator&&) = delete;
  double next();

 private:
  struct MaState {
    const std::vector<double>* psi;
    const TailSpec* noise;
    std::vector<double> window;  // ring buffer of past noise
    std::size_t head = 0;
  };
  struct SvState {
    const std::vector<double>* psi;
    const TailSpec* noise;
    std::vector<double> window;  // ring buffer of past eta
    std::size_t head = 0;
  };
  struct SreState {
    const ModelSpec::SreKestenGoldie* kg;
    const ModelSpec::SreGrey* grey;
    double x = 0.0;
  };
  const ModelSpec spec_;
  RngStream rng_;
  std::variant<std::monostate, MaState, SvState, SreState> state_;
};

std::vector<double> simulate_path(const ModelSpec& spec, std::size_t n, RngStream rng);

}  // namespace rvclt

#endif  // RVCLT_MODELS_HPP
