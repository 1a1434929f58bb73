#include "scenario_ddc/linalg.hpp"

#include <limits>

namespace scenario_ddc::linalg {

double min_eigenvalue(const MatrixXd& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const MatrixXd& m) {
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double psd_tolerance(const MatrixXd& m, double base) { return base * (1.0 + m.norm()); }

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

}  // namespace scenario_ddc::linalg
