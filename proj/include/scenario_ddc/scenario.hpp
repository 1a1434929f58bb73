#pragma once

#include <string>

namespace scenario_ddc {

/// Sample-size data for the a-priori scenario bound.
struct ScenarioSpec {
  double alpha = 0.05;
  double epsilon = 0.01;
  int nx = 0;
  int nu = 0;
  int n = 0;              // decision dimension
  double raw = 0.0;       // (2/alpha) (ln(1/epsilon) + n) before rounding
  long long N_required = 0;
};

/// n = nx^2 + nx nu + 2 (P counted as a full nx x nx matrix, plus a and b).
[[nodiscard]] int decision_dimension(int nx, int nu);

/// (2/alpha) (ln(1/epsilon) + n), unrounded.
[[nodiscard]] double scenario_bound_raw(double alpha, double epsilon, int nx, int nu);

/// Smallest integer N with N >= (2/alpha) (ln(1/epsilon) + n).
[[nodiscard]] long long required_scenarios(double alpha, double epsilon, int nx, int nu);

[[nodiscard]] ScenarioSpec make_scenario_spec(double alpha, double epsilon, int nx, int nu);

/// Violation level guaranteed by N scenarios: (2/N) (ln(1/epsilon) + n).
/// Values above 1 carry no information.
struct AchievableAlpha {
  double alpha = 0.0;
  bool vacuous = false;

  [[nodiscard]] std::string describe() const;
};

[[nodiscard]] AchievableAlpha achievable_alpha(long long N, double epsilon, int nx, int nu);

}  // namespace scenario_ddc
