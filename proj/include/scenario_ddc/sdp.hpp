#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scenario_ddc::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Scaled upper-triangle packing: entries (i, j), i <= j, column by column, with
// off-diagonals multiplied by sqrt(2) so that <svec(A), svec(B)> = tr(A B).
[[nodiscard]] Eigen::Index svec_length(int dim) noexcept;
[[nodiscard]] VectorXd svec(const MatrixXd& m);
[[nodiscard]] MatrixXd smat(const VectorXd& v, int dim);

/// F(y) = F0 + sum_i y_i F_i >= 0, every matrix stored packed.
struct LmiConstraint {
  int dim = 0;
  VectorXd constant;      // svec(F0)
  MatrixXd coefficients;  // svec_length(dim) x num_vars; column i is svec(F_i)
  std::string label;

  [[nodiscard]] MatrixXd evaluate(const VectorXd& y) const;
};

enum class ObjectiveKind {
  kFeasibility,   // any feasible point
  kMaxMinMargin,  // maximize min_j c_j lambda_min(F_j(y)), c_j = 1 / max(1, largest coefficient norm of F_j)
  kLinear,        // maximize c^T y over the feasible set
};

struct Objective {
  ObjectiveKind kind = ObjectiveKind::kFeasibility;
  VectorXd c;
};

struct SdpProblem {
  int num_vars = 0;
  std::vector<LmiConstraint> constraints;
  Objective objective;

  /// Throws ValidationError on inconsistent sizes.
  void validate() const;
};

enum class SdpStatus { kFeasible, kInfeasible, kNumericalFailure };

[[nodiscard]] const char* to_string(SdpStatus s) noexcept;

struct SdpDiagnostics {
  int iterations = 0;
  /// Optimal (or last) common margin of the margin program, in scaled units.
  double margin = 0.0;
  /// min_j lambda_min(F_j(y)) at the returned point, unscaled.
  double min_eigenvalue = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
  std::string message;
};

struct SdpResult {
  SdpStatus status = SdpStatus::kNumericalFailure;
  VectorXd y;
  SdpDiagnostics diagnostics;
};

/// Semidefinite feasibility backend.
///
/// A kFeasible result guarantees lambda_min(F_j(y)) >= -feasibility_tol *
/// (1 + ||F_j(y)||_F) for every constraint. kInfeasible and kNumericalFailure
/// are never conflated.
class SdpBackend {
 public:
  virtual ~SdpBackend() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual double feasibility_tol() const noexcept = 0;
  [[nodiscard]] virtual SdpResult solve(const SdpProblem& problem) const = 0;
};

struct InteriorPointOptions {
  double feasibility_tol = 1e-9;
  double gap_tol = 1e-9;
  int max_iterations = 120;
  /// |y_i| <= box_bound keeps the margin program bounded for any input.
  double box_bound = 1e4;
  /// Feasibility mode stops once every scaled constraint clears this margin.
  double early_stop_margin = 1e-7;
  double step_fraction = 0.95;
};

/// Infeasible-start primal-dual path-following method (HKM direction with a
/// Mehrotra predictor-corrector). Feasibility is decided through the margin
/// program  max t  s.t.  c_j F_j(y) >= t I,  where c_j normalizes each
/// constraint's coefficient scale.
class InteriorPointBackend final : public SdpBackend {
 public:
  explicit InteriorPointBackend(InteriorPointOptions options = {}) : options_(options) {}

  [[nodiscard]] std::string name() const override { return "interior-point"; }
  [[nodiscard]] double feasibility_tol() const noexcept override { return options_.feasibility_tol; }
  [[nodiscard]] SdpResult solve(const SdpProblem& problem) const override;

  [[nodiscard]] const InteriorPointOptions& options() const noexcept { return options_; }

 private:
  InteriorPointOptions options_;
};

[[nodiscard]] const SdpBackend& default_backend();
[[nodiscard]] std::unique_ptr<SdpBackend> make_backend(const std::string& name,
                                                       InteriorPointOptions options = {});

// ---------------------------------------------------------------------------
// Low-level solver on the block-diagonal LMI form
//   maximize b^T y  s.t.  Z_j = F0_j + sum_i y_i F_ij >= 0,
// paired with  minimize sum_j <F0_j, X_j>  s.t.  sum_j <F_ij, X_j> = -b_i, X >= 0.

struct DenseBlock {
  int dim = 0;
  MatrixXd constant;
  std::vector<int> vars;
  std::vector<MatrixXd> coefficients;  // parallel to vars
};

struct DualFormProblem {
  int num_vars = 0;
  std::vector<DenseBlock> blocks;
  VectorXd objective;
};

enum class IpmStatus { kOptimal, kStopped, kMaxIterations, kNumericalError };

struct IpmResult {
  IpmStatus status = IpmStatus::kNumericalError;
  VectorXd y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
  int iterations = 0;
};

struct IpmSettings {
  double tol = 1e-9;
  int max_iterations = 120;
  double step_fraction = 0.95;
};

/// `stop` is polled with the current y each iteration; returning true ends the
/// run with kStopped.
[[nodiscard]] IpmResult solve_dual_form(const DualFormProblem& problem, const IpmSettings& settings,
                                        const std::function<bool(const VectorXd&)>& stop = {});

}  // namespace scenario_ddc::sdp
