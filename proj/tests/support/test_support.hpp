#pragma once

#include <vector>

#include <Eigen/Dense>

#include "scenario_ddc/data_model.hpp"
#include "scenario_ddc/fleet.hpp"
#include "scenario_ddc/rng.hpp"

namespace scenario_ddc::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline Trajectory scalar_trajectory(const std::vector<double>& x, const std::vector<double>& u) {
  Trajectory t;
  t.states = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  t.inputs = Eigen::Map<const Eigen::RowVectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  return t;
}

inline SystemSample scalar_system(double a, double b) {
  SystemSample s;
  s.A = MatrixXd::Constant(1, 1, a);
  s.B = MatrixXd::Constant(1, 1, b);
  return s;
}

inline MatrixXd random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  return m;
}

inline MatrixXd random_spd(int n, Rng& rng) {
  const MatrixXd g = random_matrix(n, n, rng);
  return g * g.transpose() + 0.5 * MatrixXd::Identity(n, n);
}

/// Random system with spectral radius of A below `rho`.
inline SystemSample random_stable_system(int nx, int nu, Rng& rng, double rho = 0.9) {
  SystemSample s;
  MatrixXd a = random_matrix(nx, nx, rng);
  const double r = a.eigenvalues().cwiseAbs().maxCoeff();
  if (r > 0) a *= rho * rng.uniform(0.2, 1.0) / r;
  s.A = a;
  s.B = random_matrix(nx, nu, rng);
  return s;
}

inline double lambda_min(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

}  // namespace scenario_ddc::testing
