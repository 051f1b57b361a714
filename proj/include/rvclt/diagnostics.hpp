#ifndef RVCLT_DIAGNOSTICS_HPP
#define RVCLT_DIAGNOSTICS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rvclt/models.hpp"
#include "rvclt/rng.hpp"

namespace rvclt {

enum class BlockRule { log_power, remark_rem4x, manual };

// Sample of size n split into k_n = floor(n/r_n) blocks of length r_n; the
// incomplete last block is dropped.
struct BlockScheme {
  std::size_t n = 0;
  std::size_t r_n = 1;
  std::size_t k_n = 0;
  BlockRule rule = BlockRule::manual;

  static BlockScheme manual(std::size_t n, std::size_t r_n);
};

// r_n = ceil((log n)^{1+eps}) for the short-memory families; the SRE families
// need the slower growth r_n = ceil((log n)^{(1-eps)/delta}). Always clipped
// to [m+1, n/10] where m is the dependence window (0 when not applicable).
BlockScheme choose_block_scheme(const ModelSpec& model, std::size_t n, double epsilon = 0.5,
                                double delta = 0.5);

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

// Plug-in estimates of the three triangular-array conditions, scaled by k_n:
//   cond_a  = k_n P(|S_r/a_n| > 1)
//   cond_b(eps) = k_n var((S_r/a_n) 1(|S_r/a_n| <= eps))
//   cond_c  = k_n E[(S_r/a_n) 1(|S_r/a_n| <= 1)]
// Block sums are genuinely independent fresh paths (the row-wise iid
// idealization); standard errors come from a 50-group jackknife.
struct PetrovReport {
  Estimate cond_a;
  std::vector<double> eps_grid;
  std::vector<Estimate> cond_b;
  Estimate cond_c;
  std::size_t replicates = 0;
  BlockScheme scheme;
};

PetrovReport petrov_conditions(const ModelSpec& model, const BlockScheme& scheme, double a_n,
                               std::span<const double> eps_grid, std::size_t replicates,
                               std::uint64_t master_seed);

// Large-deviation ratio P(|S_r - d_r| > y) / (r P(|X| > y)) evaluated at
// block-sum quantile levels. `marginal_tail` is the closed-form tail where
// one exists, else a pre-simulated empirical tail.
struct LdPoint {
  double level = 0.0;       // tail probability of the scan point
  double y = 0.0;           // block-sum quantile at that level
  double ratio = 0.0;
  double stderr_ = 0.0;     // binomial
  double kg_region_m = 0.0;    // largest M with y >= sqrt(r) (log r)^M
  double grey_region_delta = 0.0;  // y = r^{0.5 + delta}
  bool extrapolating = false;      // below every admissible region (M <= 2)
};

struct LdScanReport {
  std::vector<LdPoint> points;
  double sup_abs_deviation = 0.0;  // sup_y |ratio - c0_expected|
  double c0_expected = 0.0;
  std::size_t replicates = 0;
  std::size_t r_n = 0;
};

LdScanReport ld_ratio_scan(const ModelSpec& model, std::size_t r_n,
                           std::span<const double> levels,
                           const std::function<double(double)>& marginal_tail,
                           double c0_expected, std::size_t replicates,
                           std::uint64_t master_seed);

// Empirical characteristic-function factorization check: the maximum over the
// u-grid of |phi_{T_n}(u) - phi_{T_r}(u)^{k_n}| where T are centered
// normalized sums. Jackknife error bars per u.
struct MixingPoint {
  double u = 0.0;
  double discrepancy = 0.0;
  double stderr_ = 0.0;
};

struct MixingReport {
  std::vector<MixingPoint> points;
  double max_discrepancy = 0.0;
  BlockScheme scheme;
};

MixingReport mixing_cf_check(const ModelSpec& model, std::size_t n, const BlockScheme& scheme,
                             double a_n, std::span<const double> u_grid,
                             std::size_t replicates_full, std::size_t replicates_block,
                             std::uint64_t master_seed);

std::vector<double> default_u_grid();  // [-2, 2] in steps of 0.25, zero dropped

// Fits E|S_n - d_n|^{2-delta} ~ c n^gamma by least squares on log-log scale.
struct MomentGrowthReport {
  double gamma_hat = 0.0;
  std::vector<double> n_grid;
  std::vector<double> log_moments;
  std::vector<double> residuals;
};

MomentGrowthReport moment_growth(const ModelSpec& model, std::span<const double> n_grid,
                                 double delta, std::size_t replicates,
                                 std::uint64_t master_seed);

}  // namespace rvclt

#endif  // RVCLT_DIAGNOSTICS_HPP
