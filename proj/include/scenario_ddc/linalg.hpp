#pragma once

#include <Eigen/Dense>

namespace scenario_ddc::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

[[nodiscard]] inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Smallest eigenvalue of the symmetric part of `m`. +inf for an empty matrix.
[[nodiscard]] double min_eigenvalue(const MatrixXd& m);
[[nodiscard]] double max_eigenvalue(const MatrixXd& m);

/// Scale-aware PSD slack: base * (1 + ||m||_F).
[[nodiscard]] double psd_tolerance(const MatrixXd& m, double base = 1e-9);

/// True when the matrix has only finite entries.
[[nodiscard]] bool all_finite(const MatrixXd& m);

}  // namespace scenario_ddc::linalg
