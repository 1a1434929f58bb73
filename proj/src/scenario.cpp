#include "scenario_ddc/scenario.hpp"

#include <cmath>
#include <sstream>

#include "scenario_ddc/error.hpp"

namespace scenario_ddc {

namespace {

void check_dims(int nx, int nu) {
  if (nx < 1 || nu < 1) throw ValidationError("scenario bound needs nx >= 1 and nu >= 1");
}

void check_unit(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) {
    std::ostringstream os;
    os << name << " must lie in the open interval (0, 1), got " << v;
    throw ValidationError(os.str());
  }
}

}  // namespace

int decision_dimension(int nx, int nu) {
  check_dims(nx, nu);
  return nx * nx + nx * nu + 2;
}

double scenario_bound_raw(double alpha, double epsilon, int nx, int nu) {
  check_unit(alpha, "alpha");
  check_unit(epsilon, "epsilon");
  return (2.0 / alpha) * (std::log(1.0 / epsilon) + decision_dimension(nx, nu));
}

long long required_scenarios(double alpha, double epsilon, int nx, int nu) {
  const double raw = scenario_bound_raw(alpha, epsilon, nx, nu);
  // Guard against a raw value that is an integer up to rounding, e.g. 20.000000000000004.
  const double nearest = std::round(raw);
  if (std::abs(raw - nearest) <= 1e-9 * std::max(1.0, raw)) return static_cast<long long>(nearest);
  return static_cast<long long>(std::ceil(raw));
}

ScenarioSpec make_scenario_spec(double alpha, double epsilon, int nx, int nu) {
  ScenarioSpec s;
  s.alpha = alpha;
  s.epsilon = epsilon;
  s.nx = nx;
  s.nu = nu;
  s.n = decision_dimension(nx, nu);
  s.raw = scenario_bound_raw(alpha, epsilon, nx, nu);
  s.N_required = required_scenarios(alpha, epsilon, nx, nu);
  return s;
}

std::string AchievableAlpha::describe() const {
  std::ostringstream os;
  os.precision(6);
  if (vacuous)
    os << "vacuous (>1): " << alpha;
  else
    os << alpha;
  return os.str();
}

AchievableAlpha achievable_alpha(long long N, double epsilon, int nx, int nu) {
  if (N < 1) throw ValidationError("achievable_alpha needs N >= 1");
  check_unit(epsilon, "epsilon");
  AchievableAlpha out;
  out.alpha = (2.0 / static_cast<double>(N)) * (std::log(1.0 / epsilon) + decision_dimension(nx, nu));
  out.vacuous = out.alpha > 1.0;
  return out;
}

}  // namespace scenario_ddc
