#include "rvclt/models.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rvclt {

// ---------------------------------------------------------------------------
// ALaw

ALaw ALaw::log_normal(double mu, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("A law: lognormal s must be > 0");
  ALaw law;
  law.law_ = LogNormal{mu, s};
  return law;
}

ALaw ALaw::discrete(std::vector<double> atoms, std::vector<double> weights) {
  if (atoms.empty() || atoms.size() != weights.size())
    throw std::invalid_argument("A law: atoms/weights size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i] < 0.0) throw std::invalid_argument("A law: atoms must be >= 0");
    if (weights[i] < 0.0) throw std::invalid_argument("A law: weights must be >= 0");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("A law: weights must sum to 1");
  ALaw law;
  law.law_ = Discrete{std::move(atoms), std::move(weights)};
  return law;
}

ALaw ALaw::constant(double c) {
  if (c < 0.0) throw std::invalid_argument("A law: constant must be >= 0");
  ALaw law;
  law.law_ = Constant{c};
  return law;
}

double ALaw::moment(double beta) const {
  if (const auto* ln = std::get_if<LogNormal>(&law_))
    return std::exp(beta * ln->mu + beta * beta * ln->s * ln->s / 2.0);
  if (const auto* d = std::get_if<Discrete>(&law_)) {
    double m = 0.0;
    for (std::size_t i = 0; i < d->atoms.size(); ++i)
      if (d->weights[i] > 0.0 && (d->atoms[i] > 0.0 || beta == 0.0))
        m += d->weights[i] * std::pow(d->atoms[i], beta);
    return m;
  }
  const double c = std::get<Constant>(law_).c;
  return c == 0.0 && beta > 0.0 ? 0.0 : std::pow(c, beta);
}

double ALaw::mean() const { return moment(1.0); }
double ALaw::second_moment() const { return moment(2.0); }

double ALaw::m2() const {
  // d/dbeta E[A^beta] = E[A^beta log A]; closed at beta = 2 per family.
  if (const auto* ln = std::get_if<LogNormal>(&law_))
    return (ln->mu + 2.0 * ln->s * ln->s) * std::exp(2.0 * ln->mu + 2.0 * ln->s * ln->s);
  if (const auto* d = std::get_if<Discrete>(&law_)) {
    double m = 0.0;
    for (std::size_t i = 0; i < d->atoms.size(); ++i)
      if (d->weights[i] > 0.0 && d->atoms[i] > 0.0)
        m += d->weights[i] * d->atoms[i] * d->atoms[i] * std::log(d->atoms[i]);
    return m;
  }
  const double c = std::get<Constant>(law_).c;
  return c > 0.0 ? c * c * std::log(c) : 0.0;
}

double ALaw::sample(RngStream& rng) const {
  if (const auto* ln = std::get_if<LogNormal>(&law_))
    return std::exp(ln->mu + ln->s * rng.normal());
  if (const auto* d = std::get_if<Discrete>(&law_)) {
    double u = rng.uniform();
    for (std::size_t i = 0; i + 1 < d->atoms.size(); ++i) {
      u -= d->weights[i];
      if (u < 0.0) return d->atoms[i];
    }
    return d->atoms.back();
  }
  return std::get<Constant>(law_).c;
}

// ---------------------------------------------------------------------------
// BLaw

BLaw BLaw::constant(double c) {
  BLaw law;
  law.law_ = c;
  return law;
}

BLaw BLaw::tail(TailSpec spec) {
  BLaw law;
  law.law_ = std::move(spec);
  return law;
}

double BLaw::mean() const {
  if (const auto* c = std::get_if<double>(&law_)) return *c;
  return std::get<TailSpec>(law_).mean();
}

double BLaw::second_moment() const {
  if (const auto* c = std::get_if<double>(&law_)) return *c * *c;
  return std::numeric_limits<double>::infinity();
}

double BLaw::sample(RngStream& rng) const {
  if (const auto* c = std::get_if<double>(&law_)) return *c;
  return std::get<TailSpec>(law_).sample(rng);
}

// ---------------------------------------------------------------------------
// CoefficientRule

CoefficientRule CoefficientRule::geometric(double ratio) {
  if (!(std::abs(ratio) < 1.0))
    throw std::invalid_argument("coefficient rule: |ratio| < 1 required for summability");
  CoefficientRule rule;
  rule.rule_ = ratio;
  return rule;
}

CoefficientRule CoefficientRule::explicit_vector(std::vector<double> psi) {
  if (psi.empty()) throw std::invalid_argument("coefficient rule: empty vector");
  CoefficientRule rule;
  rule.rule_ = std::move(psi);
  return rule;
}

std::vector<double> CoefficientRule::coefficients(int m_trunc) const {
  if (m_trunc < 0) throw std::invalid_argument("coefficient rule: m_trunc must be >= 0");
  if (const auto* ratio = std::get_if<double>(&rule_)) {
    std::vector<double> psi(static_cast<std::size_t>(m_trunc) + 1);
    double p = 1.0;
    for (auto& v : psi) {
      v = p;
      p *= *ratio;
    }
    return psi;
  }
  auto psi = std::get<std::vector<double>>(rule_);
  psi.resize(static_cast<std::size_t>(m_trunc) + 1, 0.0);
  return psi;
}

double CoefficientRule::abs_sum_bound() const {
  if (const auto* ratio = std::get_if<double>(&rule_)) return 1.0 / (1.0 - std::abs(*ratio));
  const auto& psi = std::get<std::vector<double>>(rule_);
  double s = 0.0;
  for (double v : psi) s += std::abs(v);
  return s;
}

// ---------------------------------------------------------------------------
// ModelSpec

ModelSpec ModelSpec::iid(TailSpec noise) { return ModelSpec(Iid{std::move(noise)}); }

ModelSpec ModelSpec::finite_ma(std::vector<double> psi, TailSpec noise) {
  if (psi.empty() || psi.front() != 1.0)
    throw std::invalid_argument("finite MA: psi_0 = 1 required");
  if (psi.back() == 0.0)
    throw std::invalid_argument("finite MA: psi_m must be nonzero");
  return ModelSpec(FiniteMa{std::move(psi), std::move(noise)});
}

ModelSpec ModelSpec::linear_process(CoefficientRule rule, int m_trunc, TailSpec noise) {
  if (m_trunc < 0) throw std::invalid_argument("linear process: m_trunc must be >= 0");
  if (!(rule.abs_sum_bound() < std::numeric_limits<double>::infinity()))
    throw std::invalid_argument("linear process: coefficient rule is not absolutely summable");
  auto psi = rule.coefficients(m_trunc);
  if (psi.front() != 1.0) throw std::invalid_argument("linear process: psi_0 = 1 required");
  return ModelSpec(LinearProcess{std::move(rule), m_trunc, std::move(noise), std::move(psi)});
}

ModelSpec ModelSpec::stoch_vol(std::vector<double> psi, TailSpec noise) {
  if (psi.empty()) throw std::invalid_argument("stoch vol: psi must be nonempty");
  return ModelSpec(StochVol{std::move(psi), std::move(noise)});
}

ModelSpec ModelSpec::sre_kesten_goldie(ALaw a_law, BLaw b_law) {
  const double ea2 = a_law.second_moment();
  if (std::abs(ea2 - 1.0) > 1e-8)
    throw std::invalid_argument("Kesten-Goldie SRE: E[A^2] = 1 fails (got " +
                                std::to_string(ea2) + ")");
  if (!(b_law.second_moment() < std::numeric_limits<double>::infinity()))
    throw std::invalid_argument("Kesten-Goldie SRE: E[B^2] must be finite");
  if (!(a_law.mean() < 1.0))
    throw std::invalid_argument("Kesten-Goldie SRE: E[A] < 1 required");
  return ModelSpec(SreKestenGoldie{std::move(a_law), std::move(b_law)});
}

ModelSpec ModelSpec::sre_kesten_goldie_unchecked(ALaw a_law, BLaw b_law) {
  return ModelSpec(SreKestenGoldie{std::move(a_law), std::move(b_law)});
}

ModelSpec ModelSpec::sre_grey(ALaw a_law, TailSpec b_tail) {
  if (!(a_law.second_moment() < 1.0))
    throw std::invalid_argument("Grey SRE: E[A^2] < 1 required");
  return ModelSpec(SreGrey{std::move(a_law), std::move(b_tail)});
}

ModelSpec ModelSpec::stub(std::function<double(RngStream&)> draw, double mean) {
  if (!draw) throw std::invalid_argument("stub model: empty draw function");
  return ModelSpec(IidStub{std::move(draw), mean});
}

ModelSpec ModelSpec::with_burn_in(int burn_in) const {
  if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  ModelSpec copy = *this;
  copy.burn_in_override_ = burn_in;
  return copy;
}

int ModelSpec::effective_burn_in() const {
  return burn_in_override_ ? *burn_in_override_ : default_burn_in(*this);
}

bool ModelSpec::is_sre() const {
  return std::holds_alternative<SreKestenGoldie>(model_) ||
         std::holds_alternative<SreGrey>(model_);
}

bool ModelSpec::symmetric() const {
  if (const auto* m = std::get_if<Iid>(&model_)) return m->noise.symmetric();
  if (const auto* m = std::get_if<FiniteMa>(&model_)) return m->noise.symmetric();
  if (const auto* m = std::get_if<LinearProcess>(&model_)) return m->noise.symmetric();
  if (const auto* m = std::get_if<StochVol>(&model_)) return m->noise.symmetric();
  return false;
}

const TailSpec* ModelSpec::noise_tail() const {
  if (const auto* m = std::get_if<Iid>(&model_)) return &m->noise;
  if (const auto* m = std::get_if<FiniteMa>(&model_)) return &m->noise;
  if (const auto* m = std::get_if<LinearProcess>(&model_)) return &m->noise;
  if (const auto* m = std::get_if<StochVol>(&model_)) return &m->noise;
  if (const auto* m = std::get_if<SreGrey>(&model_)) return &m->b_tail;
  return nullptr;
}

int default_burn_in(const ModelSpec& spec) {
  const auto& v = spec.variant();
  if (std::holds_alternative<ModelSpec::Iid>(v) ||
      std::holds_alternative<ModelSpec::IidStub>(v))
    return 0;
  if (const auto* m = std::get_if<ModelSpec::FiniteMa>(&v))
    return static_cast<int>(m->psi.size()) - 1;
  if (const auto* m = std::get_if<ModelSpec::LinearProcess>(&v)) return m->m_trunc;
  if (const auto* m = std::get_if<ModelSpec::StochVol>(&v))
    return static_cast<int>(m->psi.size()) - 1;
  // SRE: smallest k with rho^k < 1e-8 for the per-step contraction factor
  // sqrt(E[A^2]); at the Kesten-Goldie normalization E[A^2]=1 that rate is
  // vacuous and the L1 rate E[A] < 1 takes over.
  const ALaw* a_law = nullptr;
  if (const auto* m = std::get_if<ModelSpec::SreKestenGoldie>(&v)) a_law = &m->a_law;
  if (const auto* m = std::get_if<ModelSpec::SreGrey>(&v)) a_law = &m->a_law;
  double rho = std::sqrt(a_law->second_moment());
  if (!(rho < 1.0)) rho = a_law->mean();
  if (!(rho < 1.0))
    throw std::invalid_argument("SRE burn-in: no contracting moment (E[A] >= 1)");
  if (rho == 0.0) return 1;
  return static_cast<int>(std::ceil(std::log(1e-8) / std::log(rho)));
}

double centering_constant(const ModelSpec& spec, double n) {
  const auto& v = spec.variant();
  if (const auto* m = std::get_if<ModelSpec::SreKestenGoldie>(&v))
    return n * m->b_law.mean() / (1.0 - m->a_law.mean());
  if (const auto* m = std::get_if<ModelSpec::SreGrey>(&v))
    return n * m->b_tail.mean() / (1.0 - m->a_law.mean());
  if (const auto* m = std::get_if<ModelSpec::IidStub>(&v)) return n * m->mean;
  return 0.0;
}

// ---------------------------------------------------------------------------
// PathGenerator

PathGenerator::PathGenerator(ModelSpec spec, RngStream rng)
    : spec_(std::move(spec)), rng_(rng) {
  const auto& v = spec_.variant();
  const int burn = spec_.effective_burn_in();
  if (const auto* m = std::get_if<ModelSpec::FiniteMa>(&v)) {
    MaState st{&m->psi, &m->noise, std::vector<double>(m->psi.size(), 0.0), 0};
    for (std::size_t j = 0; j + 1 < m->psi.size(); ++j)
      st.window[j] = m->noise.sample(rng_);  // prefill the lag window
    state_ = std::move(st);
    return;
  }
  if (const auto* m = std::get_if<ModelSpec::LinearProcess>(&v)) {
    MaState st{&m->psi, &m->noise, std::vector<double>(m->psi.size(), 0.0), 0};
    for (std::size_t j = 0; j + 1 < m->psi.size(); ++j)
      st.window[j] = m->noise.sample(rng_);
    state_ = std::move(st);
    return;
  }
  if (const auto* m = std::get_if<ModelSpec::StochVol>(&v)) {
    SvState st{&m->psi, &m->noise, std::vector<double>(m->psi.size(), 0.0), 0};
    for (std::size_t j = 0; j + 1 < m->psi.size(); ++j) st.window[j] = rng_.normal();
    state_ = std::move(st);
    return;
  }
  if (const auto* m = std::get_if<ModelSpec::SreKestenGoldie>(&v)) {
    SreState st{m, nullptr, 0.0};
    for (int t = 0; t < burn; ++t)
      st.x = m->a_law.sample(rng_) * st.x + m->b_law.sample(rng_);
    state_ = st;
    return;
  }
  if (const auto* m = std::get_if<ModelSpec::SreGrey>(&v)) {
    SreState st{nullptr, m, 0.0};
    for (int t = 0; t < burn; ++t)
      st.x = m->a_law.sample(rng_) * st.x + m->b_tail.sample(rng_);
    state_ = st;
    return;
  }
  // iid / stub need no state
}

double PathGenerator::next() {
  const auto& v = spec_.variant();
  if (const auto* m = std::get_if<ModelSpec::Iid>(&v)) return m->noise.sample(rng_);
  if (const auto* m = std::get_if<ModelSpec::IidStub>(&v)) return m->draw(rng_);
  if (auto* ma = std::get_if<MaState>(&state_)) {
    // window holds the last m noise values; the new draw completes X_t.
    const auto& psi = *ma->psi;
    const std::size_t m = psi.size() - 1;
    const double z = ma->noise->sample(rng_);
    double x = psi[0] * z;
    for (std::size_t j = 1; j <= m; ++j)
      x += psi[j] * ma->window[(ma->head + m - j) % psi.size()];
    ma->window[(ma->head + m) % psi.size()] = z;
    ma->head = (ma->head + 1) % psi.size();
    return x;
  }
  if (auto* sv = std::get_if<SvState>(&state_)) {
    const auto& psi = *sv->psi;
    const std::size_t m = psi.size() - 1;
    const double eta = rng_.normal();
    double logsig = psi[0] * eta;
    for (std::size_t j = 1; j <= m; ++j)
      logsig += psi[j] * sv->window[(sv->head + m - j) % psi.size()];
    if (m > 0) {
      sv->window[(sv->head + m) % psi.size()] = eta;
      sv->head = (sv->head + 1) % psi.size();
    }
    return std::exp(logsig) * sv->noise->sample(rng_);
  }
  auto& st = std::get<SreState>(state_);
  if (st.kg != nullptr)
    st.x = st.kg->a_law.sample(rng_) * st.x + st.kg->b_law.sample(rng_);
  else
    st.x = st.grey->a_law.sample(rng_) * st.x + st.grey->b_tail.sample(rng_);
  return st.x;
}

std::vector<double> simulate_path(const ModelSpec& spec, std::size_t n, RngStream rng) {
  if (n == 0) throw std::invalid_argument("simulate_path: n must be >= 1");
  PathGenerator gen(spec, rng);
  std::vector<double> path(n);
  for (auto& x : path) x = gen.next();
  return path;
}

}  // namespace rvclt
