#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace scenario_ddc {

namespace sdp {
class SdpBackend;
}

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A recorded state-input rollout of length M+1.
///
/// Column k of `states` is x_k and column k of `inputs` is u_k, k = 0..M. The
/// final input u_M is kept for completeness but never enters the data matrices.
struct Trajectory {
  MatrixXd states;  // nx x (M+1)
  MatrixXd inputs;  // nu x (M+1)
  std::string system_id;
  std::optional<std::uint64_t> seed;

  [[nodiscard]] int nx() const noexcept { return static_cast<int>(states.rows()); }
  [[nodiscard]] int nu() const noexcept { return static_cast<int>(inputs.rows()); }
  [[nodiscard]] int horizon() const noexcept { return static_cast<int>(states.cols()) - 1; }

  /// Throws ValidationError when the invariants do not hold.
  void validate() const;
};

/// X = [x_0 .. x_{M-1}], Xplus = [x_1 .. x_M], U = [u_0 .. u_{M-1}].
struct DataMatrices {
  MatrixXd X;
  MatrixXd Xplus;
  MatrixXd U;

  [[nodiscard]] int nx() const noexcept { return static_cast<int>(X.rows()); }
  [[nodiscard]] int nu() const noexcept { return static_cast<int>(U.rows()); }
  [[nodiscard]] int horizon() const noexcept { return static_cast<int>(X.cols()); }
};

[[nodiscard]] DataMatrices build_data_matrices(const Trajectory& traj);

/// Disturbance set W = { W : [I; W^T]^T Phi [I; W^T] >= 0 } with the
/// partitioned symmetric Phi = [Phi11 Phi12; Phi12^T Phi22], Phi22 < 0.
///
/// Phi22 is M x M; when it is a negative multiple of the identity (the usual
/// bounded-energy model) it is stored as that scalar so that long horizons do
/// not cost M^2 memory per trajectory.
class NoiseModelQMI {
 public:
  /// General dense model. Validates symmetry and Phi22 < 0.
  NoiseModelQMI(MatrixXd phi11, MatrixXd phi12, MatrixXd phi22);

  /// Phi22 = phi22_scale * I_M with phi22_scale < 0.
  static NoiseModelQMI with_scaled_identity(MatrixXd phi11, MatrixXd phi12, double phi22_scale);

  [[nodiscard]] int nx() const noexcept { return static_cast<int>(phi11_.rows()); }
  [[nodiscard]] int horizon() const noexcept { return horizon_; }

  [[nodiscard]] const MatrixXd& phi11() const noexcept { return phi11_; }
  [[nodiscard]] const MatrixXd& phi12() const noexcept { return phi12_; }
  /// Materializes Phi22 (M x M).
  [[nodiscard]] MatrixXd phi22() const;
  [[nodiscard]] bool phi22_is_scaled_identity() const noexcept { return !phi22_dense_.has_value(); }
  [[nodiscard]] double phi22_scale() const noexcept { return phi22_scale_; }

  /// B * Phi22 for B with M columns.
  [[nodiscard]] MatrixXd times_phi22(const MatrixXd& b) const;
  /// B * C where -Phi22 = C C^T.
  [[nodiscard]] MatrixXd times_neg_phi22_factor(const MatrixXd& b) const;

  /// [I; W^T]^T Phi [I; W^T] = Phi11 + W Phi12^T + Phi12 W^T + W Phi22 W^T.
  [[nodiscard]] MatrixXd quadratic_form(const MatrixXd& w) const;

  /// Throws ValidationError unless the model fits (nx, M).
  void check_dimensions(int nx, int horizon) const;

 private:
  NoiseModelQMI() = default;
  void validate_common();

  MatrixXd phi11_;
  MatrixXd phi12_;
  std::optional<MatrixXd> phi22_dense_;
  std::optional<MatrixXd> neg_phi22_factor_;  // lower Cholesky factor of -Phi22
  double phi22_scale_ = -1.0;
  int horizon_ = 0;
};

/// Bounded-energy model ||w_k||^2 <= wbar: Phi11 = M wbar I, Phi12 = 0, Phi22 = -I.
[[nodiscard]] NoiseModelQMI noise_model_from_bound(double wbar, int horizon, int nx);

/// V = G Phi G^T with G = [I Xplus; 0 -X; 0 -U], a (2nx+nu)-dimensional matrix.
[[nodiscard]] MatrixXd build_slater_matrix_V(const DataMatrices& dm, const NoiseModelQMI& qmi);

enum class SlaterMethod { kLeastSquaresCandidate, kFeasibilityProgram };

[[nodiscard]] const char* to_string(SlaterMethod m) noexcept;

struct SlaterReport {
  bool satisfied = false;
  std::optional<MatrixXd> witness_Z;  // (nx+nu) x nx
  double min_eigenvalue = 0.0;
  SlaterMethod method = SlaterMethod::kLeastSquaresCandidate;
  double tolerance = 0.0;
  bool data_rank_deficient = false;
};

struct SlaterOptions {
  /// Absolute slack on the weak inequality; negative selects 1e-9 (1 + ||V||_F).
  double tol = -1.0;
  /// Skip the least-squares candidate and go straight to the program.
  bool force_program = false;
  /// Backend for the fallback program; nullptr uses the built-in interior-point solver.
  const sdp::SdpBackend* backend = nullptr;
};

/// Checks that some Z gives [I; Z]^T V [I; Z] >= 0.
///
/// The least-squares system estimate is tried first; if it fails the margin is
/// maximized over Z with a semidefinite program built from the Schur
/// complement of the concave form. Backend trouble raises SolverFailure.
[[nodiscard]] SlaterReport check_generalized_slater(const DataMatrices& dm, const NoiseModelQMI& qmi,
                                                    const SlaterOptions& options = {});

/// [I; Z]^T V [I; Z], evaluated through the residual Xplus - Z^T [X; U].
[[nodiscard]] MatrixXd slater_form(const DataMatrices& dm, const NoiseModelQMI& qmi, const MatrixXd& z);

/// Minimum-norm least-squares fit Xplus ~ A X + B U stacked as Z = [A^T; B^T].
[[nodiscard]] MatrixXd least_squares_witness(const DataMatrices& dm);

/// Smallest eigenvalue of the noise form at the residual Xplus - A X - B U.
[[nodiscard]] double consistency_margin(const MatrixXd& a, const MatrixXd& b, const DataMatrices& dm,
                                        const NoiseModelQMI& qmi);

/// Membership of (A, B) in the data-consistent set: the residual lies in W up
/// to a scale-aware slack. A negative `tol` selects the default slack.
[[nodiscard]] bool membership_consistent_set(const MatrixXd& a, const MatrixXd& b,
                                             const DataMatrices& dm, const NoiseModelQMI& qmi,
                                             double tol = -1.0);

/// Quantities that turn the data term of one trajectory into the block-diagonal
/// form diag(Psi, -I) by an exact congruence T = [I Theta; 0 S].
///
/// Theta is the (noise-weighted) least-squares estimate [A B], S whitens the
/// regressor Gram matrix, and Psi is the noise form at the estimate's residual.
/// Everything is computed from orthogonal factorizations of the raw data so the
/// result stays accurate when the states are large.
struct DataFactorization {
  MatrixXd theta_hat;      // nx x (nx+nu)
  MatrixXd whitening;      // (nx+nu) x (nx+nu)
  MatrixXd residual_form;  // nx x nx
  double regressor_condition = 0.0;
  bool full_rank = false;
};

/// Returns a factorization with full_rank = false when [X; U] does not have
/// numerically full row rank.
[[nodiscard]] DataFactorization factorize_data(const DataMatrices& dm, const NoiseModelQMI& qmi);

}  // namespace scenario_ddc
