#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rvclt/experiment.hpp"
#include "rvclt/variance.hpp"

using namespace rvclt;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig quick_config(Preset preset, const std::string& out) {
  ExperimentConfig cfg = preset_config(preset);
  cfg.n_grid = {2000.0};
  cfg.replicates = 400;
  cfg.outputs = out;
  cfg.marginal_sample_size = 1000000;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("experiment");

TEST_CASE("empty config text defaults to Custom and is rejected for the model") {
  const auto result = validate_config("   \n ");
  CHECK_FALSE(result.ok());
  bool saw_model_missing = false;
  for (const auto& e : result.errors)
    if (e.field == "model" && e.message.find("missing") != std::string::npos)
      saw_model_missing = true;
  CHECK(saw_model_missing);
}

TEST_CASE("syntax errors come with line and column") {
  const auto result = validate_config("{\n  \"preset\": \"IidOscillating\",\n  bad\n}");
  REQUIRE_FALSE(result.errors.empty());
  CHECK(result.errors.front().field == "(syntax)");
  CHECK(result.errors.front().message.find("line 3") != std::string::npos);
}

TEST_CASE("every violation is reported, not just the first") {
  const auto result = validate_config(R"({
    "preset": "IidOscillating",
    "replicates": 10,
    "n_grid": [500, 400],
    "normalization": "Banana"
  })");
  CHECK_FALSE(result.ok());
  CHECK(result.errors.size() >= 3);
  bool saw_replicates = false, saw_grid = false, saw_norm = false;
  for (const auto& e : result.errors) {
    if (e.field == "replicates" && e.message.find(">= 100") != std::string::npos)
      saw_replicates = true;
    if (e.field == "n_grid") saw_grid = true;
    if (e.field == "normalization") saw_norm = true;
  }
  CHECK(saw_replicates);
  CHECK(saw_grid);
  CHECK(saw_norm);
}

TEST_CASE("kesten-goldie config with mu != -s^2 reports the computed E[A^2]") {
  const auto result = validate_config(R"({
    "preset": "Custom",
    "model": {"variant": "SREKestenGoldie",
              "A": {"kind": "LogNormal", "mu": -0.2, "s": 0.5},
              "B": {"kind": "Constant", "value": 1.0}}
  })");
  CHECK_FALSE(result.ok());
  bool saw = false;
  for (const auto& e : result.errors)
    if (e.message.find("E[A^2]=1 fails") != std::string::npos &&
        e.message.find("1.105") != std::string::npos)
      saw = true;
  CHECK(saw);  // computed E[A^2] = exp(2 mu + 2 s^2) = e^0.1
}

TEST_CASE("emitted preset configs validate and round-trip") {
  for (Preset p : all_presets()) {
    const auto result = validate_config(emit_preset_json(p));
    CHECK(result.ok());
    if (result.ok()) CHECK(result.config->preset == p);
  }
}

TEST_CASE("MA preset summary reports both variance conventions") {
  const auto cfg = quick_config(Preset::m_dependent_ma, "build_test_out/ma");
  const auto run = run_experiment(cfg);
  const std::string summary = slurp(cfg.outputs + "/summary.json");
  CHECK(summary.find("\"sigma2_paper_an\": 2") != std::string::npos);
  CHECK(summary.find("\"sigma2_noise_an_z\": 4") != std::string::npos);
  CHECK(run.all_passed);
}

TEST_CASE("kesten-goldie preset summary carries c0 and the closed-form a_n") {
  auto cfg = quick_config(Preset::sre_kesten_goldie, "build_test_out/kg");
  const auto run = run_experiment(cfg);
  CHECK(run.all_passed);
  const std::string summary = slurp(cfg.outputs + "/summary.json");
  CHECK(summary.find("\"c0\": 32.04165") != std::string::npos);
  const KgConstants kc =
      kg_constants(ALaw::kesten_goldie_log_normal(0.5), BLaw::constant(1.0));
  char expect[64];
  std::snprintf(expect, sizeof expect, "%.10g",
                std::sqrt(kc.c_infinity * 2000.0 * std::log(2000.0)));
  CHECK(summary.find(expect) != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical outputs") {
  auto cfg = quick_config(Preset::iid_oscillating, "build_test_out/det_a");
  (void)run_experiment(cfg);
  auto again = cfg;
  again.outputs = "build_test_out/det_b";
  (void)run_experiment(again);
  for (const auto& entry : std::filesystem::directory_iterator(cfg.outputs)) {
    const auto name = entry.path().filename().string();
    if (name == "timings.json") continue;  // wall-clock lives outside the contract
    CHECK(slurp(entry.path()) == slurp(std::filesystem::path(again.outputs) / name));
  }
}

TEST_CASE("grey preset runs end to end with the empirical normalization") {
  auto cfg = quick_config(Preset::sre_grey, "build_test_out/grey");
  cfg.marginal_sample_size = 500000;
  const auto run = run_experiment(cfg);
  CHECK(run.all_passed);
  const std::string summary = slurp(cfg.outputs + "/summary.json");
  CHECK(summary.find("EmpiricalK") != std::string::npos);
  CHECK(summary.find("\"c0\": 3") != std::string::npos);
}

TEST_CASE("stoch-vol preset passes its declared assertions") {
  auto cfg = quick_config(Preset::stoch_vol, "build_test_out/sv");
  const auto run = run_experiment(cfg);
  for (const auto& a : run.assertions) {
    INFO(a.name, ": ", a.detail);
    CHECK(a.passed);
  }
}

TEST_CASE("linear preset passes its declared assertions") {
  auto cfg = quick_config(Preset::linear_infinite, "build_test_out/lin");
  const auto run = run_experiment(cfg);
  for (const auto& a : run.assertions) {
    INFO(a.name, ": ", a.detail);
    CHECK(a.passed);
  }
}

TEST_SUITE_END();
