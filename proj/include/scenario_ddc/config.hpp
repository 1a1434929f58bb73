#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scenario_ddc/fleet.hpp"
#include "scenario_ddc/synthesis.hpp"

namespace scenario_ddc {

struct FleetSettings {
  double sigma2 = 0.1;  // fixed variance of the M x N sweep
  TruncationKind truncation = TruncationKind::kEllipsoid;
  double wbar = 0.015;
  InputLaw input_law;
  X0Law x0_law;
  int M = 50;  // fixed horizon of the sigma2 x N sweep and of `generate`
  int N = 32;  // system count for `generate`
};

struct SweepSettings {
  std::vector<double> sigma2{1e-4, 1e-2, 0.05};
  std::vector<int> N{4, 8, 16, 32};
  std::vector<int> M{10, 50, 200};
  int repetitions = 50;
  int n_test = 1000;
};

struct ScenarioSettings {
  double alpha = 0.05;
  double epsilon = 0.01;
};

struct SolverSettings {
  double delta = 1e-6;
  double tol_psd = 1e-9;
  double feasibility_tol = 1e-9;
  int max_iterations = 120;
  std::string backend = "interior-point";
  SynthesisObjective objective = SynthesisObjective::kFeasibility;
  /// Fills solve_time_ms; off by default because wall-clock time breaks
  /// byte-identical reruns.
  bool record_timing = false;
  int slater_retries = 5;
};

struct UncertaintySettings {
  double a_true = 0.9;
  double b_true = 1.4;
  double wbar = 0.015;
  std::vector<int> lengths{5, 20, 100, 500};
  int seeds = 5;
  double a_min = 0.4, a_max = 1.4, b_min = 0.9, b_max = 1.9;
  int resolution = 201;
};

struct ExperimentConfig {
  FleetSettings fleet;
  SweepSettings sweep;
  ScenarioSettings scenario;
  SolverSettings solver;
  UncertaintySettings uncertainty;
  std::string output_dir = "out";
  std::uint64_t master_seed = 20240601;

  /// Throws ValidationError with the offending key.
  void validate() const;
};

/// INI/TOML-style document: [section] headers, `key = value` lines, lists as
/// `[1, 2, 3]` or `1, 2, 3`, strings optionally quoted, `#` or `;` comments.
/// Unknown sections and keys are rejected.
[[nodiscard]] ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin = "config");
[[nodiscard]] ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// The configuration as a canonical document (parses back to the same values).
[[nodiscard]] std::string render_experiment_config(const ExperimentConfig& cfg);

}  // namespace scenario_ddc
