#pragma once

#include <stdexcept>
#include <string>

namespace scenario_ddc {

// Malformed input: wrong dimensions, out-of-range parameters, bad files.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// The numerical backend could not produce a trustworthy answer. Distinct from
// a verified "infeasible" outcome.
class SolverFailure : public std::runtime_error {
 public:
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

// A sampler or simulator gave up: rejection cap reached, or a rollout left the
// representable range.
class SamplingError : public std::runtime_error {
 public:
  explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace scenario_ddc
