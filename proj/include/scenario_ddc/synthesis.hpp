#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scenario_ddc/data_model.hpp"
#include "scenario_ddc/sdp.hpp"

namespace scenario_ddc {

/// One value of the decision record (P, L, a, b).
struct LmiDecision {
  MatrixXd P;  // nx x nx symmetric
  MatrixXd L;  // nu x nx
  double a = 0.0;
  double b = 1.0;
};

/// [P - bI, 0, 0, 0; 0, -P, -L^T, 0; 0, -L, 0, L; 0, 0, L^T, P], size 3nx+nu.
[[nodiscard]] MatrixXd stability_block(const MatrixXd& P, const MatrixXd& L, double b);

/// F(P, L, a, b) = stability_block(P, L, b) - a * data_term for one trajectory.
///
/// When the regressor [X; U] has full row rank the constraint also carries an
/// invertible congruence T with T * data_term * T^T = conditioned_data_term =
/// diag(Psi, -I, 0). T F T^T is then the same constraint up to congruence, but
/// its entries no longer grow with the magnitude of the recorded states.
struct ScenarioConstraint {
  MatrixXd data_term;  // V padded with a zero last block row/column
  std::optional<MatrixXd> congruence;
  MatrixXd conditioned_data_term;
  std::string label;

  [[nodiscard]] int dim() const noexcept { return static_cast<int>(data_term.rows()); }
  [[nodiscard]] MatrixXd evaluate(const LmiDecision& d) const;
  /// T F T^T when a congruence is available, F otherwise.
  [[nodiscard]] MatrixXd evaluate_conditioned(const LmiDecision& d) const;
};

/// The homogeneous scale of the constraints is fixed by b = 1.
enum class Normalization { kUnitB };

struct LmiProblem {
  int nx = 0;
  int nu = 0;
  std::vector<ScenarioConstraint> constraints;
  double delta = 1e-6;  // P >= delta I and b >= delta stand in for the strict inequalities
  Normalization normalization = Normalization::kUnitB;

  [[nodiscard]] int dim() const noexcept { return 3 * nx + nu; }
};

[[nodiscard]] ScenarioConstraint assemble_single_lmi(const DataMatrices& dm, const NoiseModelQMI& qmi,
                                                     double delta = 1e-6);

[[nodiscard]] LmiProblem assemble_scenario_lmi(const std::vector<DataMatrices>& dms,
                                               const std::vector<NoiseModelQMI>& qmis, double delta = 1e-6);

enum class SynthesisObjective { kFeasibility, kMaxMargin };

[[nodiscard]] const char* to_string(SynthesisObjective o) noexcept;
[[nodiscard]] SynthesisObjective synthesis_objective_from_string(const std::string& s);

struct SynthesisOptions {
  SynthesisObjective objective = SynthesisObjective::kFeasibility;
  /// Relative slack of the post-hoc eigenvalue checks: tol * (1 + ||F||_F).
  double tol_psd = 1e-9;
  /// Relative residual allowed in K P = L.
  double tol_lin = 1e-9;
  /// Hand the conditioned constraints to the backend when available.
  bool use_conditioning = true;
};

struct SynthesisCertificate {
  MatrixXd P;
  MatrixXd L;
  double a = 0.0;
  double b = 1.0;
  MatrixXd K;
  double delta = 1e-6;
  std::vector<double> per_scenario_margins;  // lambda_min of every raw constraint
};

enum class SynthesisStatus { kFeasible, kInfeasible, kNumericalFailure };

[[nodiscard]] const char* to_string(SynthesisStatus s) noexcept;

struct SynthesisDiagnostics {
  sdp::SdpDiagnostics backend;
  std::string backend_name;
  /// Margin of the normalized program (positive iff strictly feasible).
  double normalized_margin = 0.0;
  bool conditioned = false;
  /// Retries attempted after the first solve, comma separated; empty if none.
  std::string relaxation;
  std::string message;
};

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::kNumericalFailure;
  std::optional<SynthesisCertificate> certificate;
  SynthesisDiagnostics diagnostics;
};

/// Solves the stacked LMI. The backend sees the homogeneous program normalized
/// by tr(P) + a + b = 1 with the common margin maximized (or merely made
/// positive); the result is rescaled to b = 1 and checked independently of the
/// backend before it is returned.
[[nodiscard]] SynthesisResult solve_feasibility(const LmiProblem& prob,
                                                const sdp::SdpBackend& backend = sdp::default_backend(),
                                                const SynthesisOptions& options = {});

/// Verification used by solve_feasibility; fills per_scenario_margins and
/// returns an explanation of the first failed check, or nullopt.
[[nodiscard]] std::optional<std::string> verify_certificate(const LmiProblem& prob, SynthesisCertificate& cert,
                                                            const SynthesisOptions& options = {});

/// K with K P = L, via a Cholesky solve. Throws ValidationError unless P > 0.
[[nodiscard]] MatrixXd extract_controller(const MatrixXd& P, const MatrixXd& L);

struct StabilityMargin {
  bool certified = false;
  double margin = 0.0;  // lambda_min(P - (A+BK) P (A+BK)^T)
};

[[nodiscard]] StabilityMargin certify_quadratic_stability(const MatrixXd& K, const MatrixXd& P,
                                                          const MatrixXd& A, const MatrixXd& B,
                                                          double tol_pd = 1e-9);

}  // namespace scenario_ddc
