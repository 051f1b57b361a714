#ifndef RVCLT_EXPERIMENT_HPP
#define RVCLT_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rvclt/models.hpp"

namespace rvclt {

enum class Preset {
  iid_oscillating,
  m_dependent_ma,
  linear_infinite,
  stoch_vol,
  sre_kesten_goldie,
  sre_grey,
  custom,
};

enum class Normalization { paper_an, noise_an_z, closed_form };

std::string to_string(Preset p);
std::string to_string(Normalization n);
std::optional<Preset> preset_from_string(const std::string& name);

struct BlockRuleConfig {
  std::string rule = "LogPower";  // LogPower | RemarkRem4x
  double epsilon = 0.5;
  double delta = 0.5;
};

struct ExperimentConfig {
  Preset preset = Preset::custom;
  std::optional<ModelSpec> model;
  std::vector<double> n_grid{10000.0};
  std::size_t replicates = 400;
  std::uint64_t master_seed = 1;
  BlockRuleConfig block_rule;
  Normalization normalization = Normalization::paper_an;
  std::string outputs = "out";
  // Stage-level budgets; presets pick sensible defaults.
  std::size_t petrov_replicates = 0;       // 0: derived from replicates
  std::size_t ld_replicates = 0;
  std::size_t mixing_block_replicates = 0;
  std::size_t marginal_sample_size = 10000000;  // empirical-K presample
};

struct ConfigError {
  std::string field;
  std::string message;
};

// Parses and validates; reports every violation, not just the first.
// Whitespace-only input counts as an empty object so defaulting is exercised.
struct ValidationResult {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigError> errors;
  bool ok() const { return errors.empty() && config.has_value(); }
};
ValidationResult validate_config(const std::string& raw_text);

// Ready-to-run config for a named preset (the propositions' presets).
ExperimentConfig preset_config(Preset preset);
std::string emit_preset_json(Preset preset);
std::vector<Preset> all_presets();

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct AssertionOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunResult {
  bool all_passed = false;
  std::vector<AssertionOutcome> assertions;
  std::vector<StageTiming> timings;
  std::string summary_path;
  std::string manifest_path;
};

// Executes the full stage pipeline for each n in n_grid, persists
// summary.json, manifest.json and per-stage CSV files under config.outputs,
// and drops a FAILED marker when any preset-declared assertion fails.
RunResult run_experiment(const ExperimentConfig& config);

}  // namespace rvclt

#endif  // RVCLT_EXPERIMENT_HPP
