#include "rvclt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rvclt/parallel.hpp"

namespace rvclt {

namespace {

constexpr std::size_t kJackknifeGroups = 50;

// Runs replicate bodies grouped so that per-group accumulation order is a
// pure function of the replicate indices, never of the thread count.
template <typename GroupState, typename Body>
std::vector<GroupState> run_grouped(std::size_t replicates, Body&& body) {
  const std::size_t groups = std::min<std::size_t>(kJackknifeGroups, std::max<std::size_t>(replicates, 1));
  std::vector<GroupState> states(groups);
  parallel_for(groups, [&](std::size_t g) {
    const std::size_t lo = replicates * g / groups;
    const std::size_t hi = replicates * (g + 1) / groups;
    for (std::size_t rep = lo; rep < hi; ++rep) body(states[g], rep);
  });
  return states;
}

// Mean and jackknife-style standard error of a per-group statistic.
Estimate group_estimate(const std::vector<double>& group_values,
                        const std::vector<double>& group_weights) {
  const std::size_t g = group_values.size();
  double wsum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    wsum += group_weights[i];
    mean += group_values[i] * group_weights[i];
  }
  mean /= wsum;
  double scatter = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double w = group_weights[i] / wsum;
    scatter += w * (group_values[i] - mean) * (group_values[i] - mean);
  }
  Estimate e;
  e.value = mean;
  e.stderr_ = g > 1 ? std::sqrt(scatter / static_cast<double>(g - 1)) : 0.0;
  return e;
}

int dependence_window(const ModelSpec& model) {
  const auto& v = model.variant();
  if (const auto* m = std::get_if<ModelSpec::FiniteMa>(&v))
    return static_cast<int>(m->psi.size()) - 1;
  if (const auto* m = std::get_if<ModelSpec::LinearProcess>(&v)) return m->m_trunc;
  if (const auto* m = std::get_if<ModelSpec::StochVol>(&v))
    return static_cast<int>(m->psi.size()) - 1;
  return 0;
}

}  // namespace

BlockScheme BlockScheme::manual(std::size_t n, std::size_t r_n) {
  if (r_n < 1 || r_n > n) throw std::invalid_argument("block scheme: need 1 <= r_n <= n");
  BlockScheme s;
  s.n = n;
  s.r_n = r_n;
  s.k_n = n / r_n;
  s.rule = BlockRule::manual;
  return s;
}

BlockScheme choose_block_scheme(const ModelSpec& model, std::size_t n, double epsilon,
                                double delta) {
  if (n < 100) throw std::invalid_argument("choose_block_scheme: n >= 100 required");
  const double ln = std::log(static_cast<double>(n));
  double r;
  BlockRule rule;
  if (model.is_sre()) {
    if (!(delta > 0.0 && delta < 1.0) || !(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("choose_block_scheme: need epsilon, delta in (0,1)");
    r = std::ceil(std::pow(ln, (1.0 - epsilon) / delta));
    rule = BlockRule::remark_rem4x;
  } else {
    if (!(epsilon > 0.0)) throw std::invalid_argument("choose_block_scheme: epsilon > 0");
    r = std::ceil(std::pow(ln, 1.0 + epsilon));
    rule = BlockRule::log_power;
  }
  const double lo = static_cast<double>(dependence_window(model) + 1);
  const double hi = std::max(lo, static_cast<double>(n) / 10.0);
  r = std::min(std::max(r, lo), hi);
  BlockScheme s = BlockScheme::manual(n, static_cast<std::size_t>(r));
  s.rule = rule;
  return s;
}

PetrovReport petrov_conditions(const ModelSpec& model, const BlockScheme& scheme, double a_n,
                               std::span<const double> eps_grid, std::size_t replicates,
                               std::uint64_t master_seed) {
  if (!(a_n > 0.0)) throw std::invalid_argument("petrov_conditions: a_n must be positive");
  if (replicates < 1000)
    throw std::invalid_argument("petrov_conditions: replicates >= 1000 required");
  if (eps_grid.empty()) throw std::invalid_argument("petrov_conditions: empty eps grid");

  const double d_r = centering_constant(model, static_cast<double>(scheme.r_n));
  const double kn = static_cast<double>(scheme.k_n);

  struct Group {
    std::size_t count = 0;
    std::size_t exceed = 0;              // |V| > 1
    double sum_c = 0.0;                  // V 1(|V| <= 1)
    std::vector<double> sum_b, sum_b2;   // per eps: V 1(.), V^2 1(.)
  };
  const std::size_t ne = eps_grid.size();
  auto groups = run_grouped<Group>(replicates, [&](Group& g, std::size_t rep) {
    if (g.sum_b.empty()) {
      g.sum_b.assign(ne, 0.0);
      g.sum_b2.assign(ne, 0.0);
    }
    PathGenerator gen(model, RngStream(master_seed, Stage::petrov, scheme.n, rep));
    double s = 0.0;
    for (std::size_t t = 0; t < scheme.r_n; ++t) s += gen.next();
    const double v = (s - d_r) / a_n;
    const double av = std::abs(v);
    ++g.count;
    if (av > 1.0) ++g.exceed;
    if (av <= 1.0) g.sum_c += v;
    for (std::size_t e = 0; e < ne; ++e) {
      if (av <= eps_grid[e]) {
        g.sum_b[e] += v;
        g.sum_b2[e] += v * v;
      }
    }
  });

  PetrovReport report;
  report.scheme = scheme;
  report.replicates = replicates;
  report.eps_grid.assign(eps_grid.begin(), eps_grid.end());

  std::vector<double> vals(groups.size()), weights(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    weights[i] = static_cast<double>(groups[i].count);
    vals[i] = kn * static_cast<double>(groups[i].exceed) / std::max(weights[i], 1.0);
  }
  report.cond_a = group_estimate(vals, weights);

  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const double m = std::max(static_cast<double>(groups[i].count), 1.0);
      const double mean_w = groups[i].sum_b[e] / m;
      vals[i] = kn * (groups[i].sum_b2[e] / m - mean_w * mean_w);
    }
    report.cond_b.push_back(group_estimate(vals, weights));
  }

  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double m = std::max(static_cast<double>(groups[i].count), 1.0);
    vals[i] = kn * groups[i].sum_c / m;
  }
  report.cond_c = group_estimate(vals, weights);
  return report;
}

LdScanReport ld_ratio_scan(const ModelSpec& model, std::size_t r_n,
                           std::span<const double> levels,
                           const std::function<double(double)>& marginal_tail,
                           double c0_expected, std::size_t replicates,
                           std::uint64_t master_seed) {
  if (levels.empty()) throw std::invalid_argument("ld_ratio_scan: empty level grid");
  for (double p : levels) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("ld_ratio_scan: levels in (0,1)");
    if (p * static_cast<double>(replicates) < 30.0)
      throw std::invalid_argument(
          "ld_ratio_scan: level " + std::to_string(p) + " needs at least " +
          std::to_string(static_cast<std::size_t>(std::ceil(30.0 / p))) + " replicates");
  }
  const double d_r = centering_constant(model, static_cast<double>(r_n));
  std::vector<double> dev(replicates);
  parallel_for(replicates, [&](std::size_t rep) {
    PathGenerator gen(model, RngStream(master_seed, Stage::ld_scan, r_n, rep));
    double s = 0.0;
    for (std::size_t t = 0; t < r_n; ++t) s += gen.next();
    dev[rep] = std::abs(s - d_r);
  });
  std::sort(dev.begin(), dev.end());

  LdScanReport report;
  report.c0_expected = c0_expected;
  report.replicates = replicates;
  report.r_n = r_n;
  const double sqrt_r = std::sqrt(static_cast<double>(r_n));
  const double loglog = std::log(std::log(static_cast<double>(r_n)));
  for (double p : levels) {
    LdPoint pt;
    pt.level = p;
    const auto rank = static_cast<std::size_t>(
        std::min(std::max((1.0 - p) * static_cast<double>(replicates), 0.0),
                 static_cast<double>(replicates - 1)));
    pt.y = dev[rank];
    const double phat =
        static_cast<double>(dev.end() - std::upper_bound(dev.begin(), dev.end(), pt.y)) /
        static_cast<double>(replicates);
    const double denom = static_cast<double>(r_n) * marginal_tail(pt.y);
    pt.ratio = phat / denom;
    pt.stderr_ = std::sqrt(phat * (1.0 - phat) / static_cast<double>(replicates)) / denom;
    pt.kg_region_m = pt.y > sqrt_r ? std::log(pt.y / sqrt_r) / loglog : 0.0;
    pt.grey_region_delta =
        std::log(pt.y) / std::log(static_cast<double>(r_n)) - 0.5;
    pt.extrapolating = pt.kg_region_m <= 2.0;
    report.sup_abs_deviation = std::max(report.sup_abs_deviation,
                                        std::abs(pt.ratio - c0_expected));
    report.points.push_back(pt);
  }
  return report;
}

std::vector<double> default_u_grid() {
  std::vector<double> grid;
  for (int k = -8; k <= 8; ++k)
    if (k != 0) grid.push_back(0.25 * k);
  return grid;
}

MixingReport mixing_cf_check(const ModelSpec& model, std::size_t n, const BlockScheme& scheme,
                             double a_n, std::span<const double> u_grid,
                             std::size_t replicates_full, std::size_t replicates_block,
                             std::uint64_t master_seed) {
  if (!(a_n > 0.0)) throw std::invalid_argument("mixing_cf_check: a_n must be positive");
  if (replicates_full < 1000 || replicates_block < 1000)
    throw std::invalid_argument("mixing_cf_check: replicates >= 1000 required");
  const std::size_t nu = u_grid.size();
  const double d_full = centering_constant(model, static_cast<double>(n));
  const double d_block = centering_constant(model, static_cast<double>(scheme.r_n));

  struct Group {
    std::size_t count = 0;
    std::vector<double> re, im;
  };
  auto run_ecf = [&](Stage stage, std::size_t len, double centering, std::size_t reps) {
    return run_grouped<Group>(reps, [&, stage, len, centering](Group& g, std::size_t rep) {
      if (g.re.empty()) {
        g.re.assign(nu, 0.0);
        g.im.assign(nu, 0.0);
      }
      PathGenerator gen(model, RngStream(master_seed, stage, len, rep));
      double s = 0.0;
      for (std::size_t t = 0; t < len; ++t) s += gen.next();
      const double v = (s - centering) / a_n;
      ++g.count;
      for (std::size_t j = 0; j < nu; ++j) {
        g.re[j] += std::cos(u_grid[j] * v);
        g.im[j] += std::sin(u_grid[j] * v);
      }
    });
  };
  auto full = run_ecf(Stage::mixing_full, n, d_full, replicates_full);
  auto block = run_ecf(Stage::mixing_block, scheme.r_n, d_block, replicates_block);

  // Leave-one-group-out discrepancies give the jackknife error bars.
  const double kn = static_cast<double>(scheme.k_n);
  MixingReport report;
  report.scheme = scheme;
  for (std::size_t j = 0; j < nu; ++j) {
    auto disc = [&](std::size_t skip_full, std::size_t skip_block) {
      double fre = 0.0, fim = 0.0, fcnt = 0.0;
      for (std::size_t g = 0; g < full.size(); ++g) {
        if (g == skip_full) continue;
        fre += full[g].re.empty() ? 0.0 : full[g].re[j];
        fim += full[g].im.empty() ? 0.0 : full[g].im[j];
        fcnt += static_cast<double>(full[g].count);
      }
      double bre = 0.0, bim = 0.0, bcnt = 0.0;
      for (std::size_t g = 0; g < block.size(); ++g) {
        if (g == skip_block) continue;
        bre += block[g].re.empty() ? 0.0 : block[g].re[j];
        bim += block[g].im.empty() ? 0.0 : block[g].im[j];
        bcnt += static_cast<double>(block[g].count);
      }
      const double fr = fre / fcnt, fi = fim / fcnt;
      const double br = bre / bcnt, bi = bim / bcnt;
      // (br + i bi)^{k_n} in polar form.
      const double mod = std::pow(std::hypot(br, bi), kn);
      const double arg = kn * std::atan2(bi, br);
      const double dre = fr - mod * std::cos(arg);
      const double dim = fi - mod * std::sin(arg);
      return std::hypot(dre, dim);
    };
    MixingPoint pt;
    pt.u = u_grid[j];
    const std::size_t none = static_cast<std::size_t>(-1);
    pt.discrepancy = disc(none, none);
    // Jackknife over both samples' groups.
    std::vector<double> deleted;
    deleted.reserve(full.size() + block.size());
    for (std::size_t g = 0; g < full.size(); ++g) deleted.push_back(disc(g, none));
    for (std::size_t g = 0; g < block.size(); ++g) deleted.push_back(disc(none, g));
    double mean = 0.0;
    for (double d : deleted) mean += d;
    mean /= static_cast<double>(deleted.size());
    double ss = 0.0;
    for (double d : deleted) ss += (d - mean) * (d - mean);
    const double gtot = static_cast<double>(deleted.size());
    pt.stderr_ = std::sqrt(std::max(ss, 0.0) * (gtot - 1.0) / gtot);
    report.points.push_back(pt);
    report.max_discrepancy = std::max(report.max_discrepancy, pt.discrepancy);
  }
  return report;
}

MomentGrowthReport moment_growth(const ModelSpec& model, std::span<const double> n_grid,
                                 double delta, std::size_t replicates,
                                 std::uint64_t master_seed) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("moment_growth: delta in (0,1) required");
  if (n_grid.size() < 3)
    throw std::invalid_argument("moment_growth: need at least 3 grid points");
  MomentGrowthReport report;
  report.n_grid.assign(n_grid.begin(), n_grid.end());
  for (double nd : n_grid) {
    const auto n = static_cast<std::size_t>(nd);
    const double d_n = centering_constant(model, nd);
    std::vector<double> vals(replicates);
    parallel_for(replicates, [&](std::size_t rep) {
      PathGenerator gen(model, RngStream(master_seed, Stage::moment_growth, n, rep));
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += gen.next();
      vals[rep] = std::pow(std::abs(s - d_n), 2.0 - delta);
    });
    report.log_moments.push_back(std::log(compensated_sum(vals) / static_cast<double>(replicates)));
  }
  // Least squares of log-moment on log n.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double m = static_cast<double>(n_grid.size());
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const double x = std::log(n_grid[i]);
    sx += x;
    sy += report.log_moments[i];
    sxx += x * x;
    sxy += x * report.log_moments[i];
  }
  report.gamma_hat = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - report.gamma_hat * sx) / m;
  for (std::size_t i = 0; i < n_grid.size(); ++i)
    report.residuals.push_back(report.log_moments[i] - intercept -
                               report.gamma_hat * std::log(n_grid[i]));
  return report;
}

}  // namespace rvclt
