#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rvclt/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_validate(const std::string& path) {
  const auto result = rvclt::validate_config(read_file(path));
  if (result.ok()) {
    std::cout << "config OK: preset " << rvclt::to_string(result.config->preset) << ", "
              << result.config->n_grid.size() << " grid point(s), replicates "
              << result.config->replicates << "\n";
    return 0;
  }
  for (const auto& e : result.errors)
    std::cerr << "config error at " << e.field << ": " << e.message << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo verification toolkit for Gaussian limits of "
               "infinite-variance stationary time series"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset_name;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  std::size_t replicates_override = 0;

  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config file (JSON)")->required();
  run->add_option("--seed", seed_override, "override master_seed");
  run->add_option("--replicates", replicates_override, "override replicates");
  run->add_option("--out", out_override, "override output directory");

  auto* validate = app.add_subcommand("validate", "validate a config and list every violation");
  validate->add_option("config", config_path, "config file (JSON)")->required();

  std::size_t sim_n = 10000;
  std::string sim_format = "csv";
  std::string sim_out;
  auto* simulate = app.add_subcommand(
      "simulate", "export one stationary path of the config's model");
  simulate->add_option("config", config_path, "config file (JSON)")->required();
  simulate->add_option("--n", sim_n, "path length (default 10000)");
  simulate->add_option("--format", sim_format, "csv (one value per line) or f64 (binary)")
      ->check(CLI::IsMember({"csv", "f64"}));
  simulate->add_option("--out", sim_out, "output file")->required();
  simulate->add_option("--seed", seed_override, "override master_seed");

  auto* preset = app.add_subcommand("preset", "preset utilities");
  auto* preset_list = preset->add_subcommand("list", "list preset names");
  auto* preset_emit = preset->add_subcommand("emit", "write a ready-to-run config");
  preset_emit->add_option("name", preset_name, "preset name")->required();
  preset_emit->add_option("--out", out_override, "file to write (default: stdout)");
  preset->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      seed_set = run->count("--seed") > 0;
      auto result = rvclt::validate_config(read_file(config_path));
      if (!result.ok()) {
        for (const auto& e : result.errors)
          std::cerr << "config error at " << e.field << ": " << e.message << "\n";
        return 1;
      }
      rvclt::ExperimentConfig cfg = *result.config;
      if (seed_set) cfg.master_seed = seed_override;
      if (replicates_override) cfg.replicates = replicates_override;
      if (!out_override.empty()) cfg.outputs = out_override;
      const auto outcome = rvclt::run_experiment(cfg);
      for (const auto& a : outcome.assertions)
        std::cout << (a.passed ? "[pass] " : "[FAIL] ") << a.name << "  " << a.detail << "\n";
      std::cout << "summary: " << outcome.summary_path << "\n";
      return outcome.all_passed ? 0 : 2;
    }
    if (validate->parsed()) return cmd_validate(config_path);
    if (simulate->parsed()) {
      auto result = rvclt::validate_config(read_file(config_path));
      if (!result.ok()) {
        for (const auto& e : result.errors)
          std::cerr << "config error at " << e.field << ": " << e.message << "\n";
        return 1;
      }
      std::uint64_t seed = result.config->master_seed;
      if (simulate->count("--seed") > 0) seed = seed_override;
      const auto path = rvclt::simulate_path(
          *result.config->model, sim_n,
          rvclt::RngStream(seed, rvclt::Stage::generic, sim_n, 0));
      std::ofstream out(sim_out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + sim_out);
      if (sim_format == "f64") {
        out.write(reinterpret_cast<const char*>(path.data()),
                  static_cast<std::streamsize>(path.size() * sizeof(double)));
      } else {
        char line[40];
        for (double v : path) {
          std::snprintf(line, sizeof line, "%.17g\n", v);
          out << line;
        }
      }
      std::cout << "wrote " << path.size() << " values to " << sim_out << "\n";
      return 0;
    }
    if (preset_list->parsed()) {
      for (auto p : rvclt::all_presets()) std::cout << rvclt::to_string(p) << "\n";
      return 0;
    }
    if (preset_emit->parsed()) {
      const auto p = rvclt::preset_from_string(preset_name);
      if (!p) {
        std::cerr << "unknown preset '" << preset_name << "'\n";
        return 1;
      }
      const std::string text = rvclt::emit_preset_json(*p);
      if (out_override.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(out_override, std::ios::binary);
        out << text;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
