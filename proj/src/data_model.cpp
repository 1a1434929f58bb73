#include "scenario_ddc/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scenario_ddc/error.hpp"
#include "scenario_ddc/linalg.hpp"
#include "scenario_ddc/sdp.hpp"

namespace scenario_ddc {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kNegDefTol = 1e-12;
constexpr double kRankConditionLimit = 1e14;

bool is_symmetric(const MatrixXd& m) {
  return (m - m.transpose()).norm() <= kSymmetryTol * (1.0 + m.norm());
}

MatrixXd stacked_regressor(const DataMatrices& dm) {
  MatrixXd xi(dm.nx() + dm.nu(), dm.horizon());
  xi << dm.X, dm.U;
  return xi;
}

void check_data(const DataMatrices& dm) {
  if (dm.nx() < 1 || dm.nu() < 1 || dm.horizon() < 1)
    throw ValidationError("data matrices need nx >= 1, nu >= 1 and M >= 1");
  if (dm.Xplus.rows() != dm.nx() || dm.Xplus.cols() != dm.horizon() || dm.U.cols() != dm.horizon())
    throw ValidationError("data matrices X, Xplus, U have inconsistent shapes");
}

}  // namespace

void Trajectory::validate() const {
  if (states.rows() < 1) throw ValidationError("trajectory: state dimension must be >= 1");
  if (inputs.rows() < 1) throw ValidationError("trajectory: input dimension must be >= 1");
  if (states.cols() < 2) throw ValidationError("trajectory: need at least two states (M >= 1)");
  if (inputs.cols() != states.cols()) {
    std::ostringstream os;
    os << "trajectory '" << system_id << "': " << states.cols() << " states but " << inputs.cols()
       << " inputs (expected equal counts)";
    throw ValidationError(os.str());
  }
  if (!states.allFinite() || !inputs.allFinite())
    throw ValidationError("trajectory '" + system_id + "' contains non-finite values");
}

DataMatrices build_data_matrices(const Trajectory& traj) {
  traj.validate();
  const Eigen::Index m = traj.horizon();
  return DataMatrices{traj.states.leftCols(m), traj.states.rightCols(m), traj.inputs.leftCols(m)};
}

// ---------------------------------------------------------------------------

void NoiseModelQMI::validate_common() {
  if (phi11_.rows() < 1 || phi11_.rows() != phi11_.cols())
    throw ValidationError("noise model: Phi11 must be square with nx >= 1");
  if (!is_symmetric(phi11_)) throw ValidationError("noise model: Phi11 must be symmetric");
  if (phi12_.rows() != phi11_.rows() || phi12_.cols() < 1)
    throw ValidationError("noise model: Phi12 must be nx x M with M >= 1");
  if (!phi11_.allFinite() || !phi12_.allFinite()) throw ValidationError("noise model: non-finite entries");
  horizon_ = static_cast<int>(phi12_.cols());
}

NoiseModelQMI::NoiseModelQMI(MatrixXd phi11, MatrixXd phi12, MatrixXd phi22)
    : phi11_(std::move(phi11)), phi12_(std::move(phi12)) {
  validate_common();
  if (phi22.rows() != horizon_ || phi22.cols() != horizon_)
    throw ValidationError("noise model: Phi22 must be M x M");
  if (!phi22.allFinite() || !is_symmetric(phi22)) throw ValidationError("noise model: Phi22 must be symmetric");
  const double top = linalg::max_eigenvalue(phi22);
  if (!(top < -kNegDefTol)) {
    std::ostringstream os;
    os << "noise model: Phi22 must be negative definite (largest eigenvalue " << top << ")";
    throw ValidationError(os.str());
  }
  Eigen::LLT<MatrixXd> llt(-linalg::symmetrize(phi22));
  neg_phi22_factor_ = MatrixXd(llt.matrixL());
  phi22_dense_ = std::move(phi22);
}

NoiseModelQMI NoiseModelQMI::with_scaled_identity(MatrixXd phi11, MatrixXd phi12, double phi22_scale) {
  NoiseModelQMI q;
  q.phi11_ = std::move(phi11);
  q.phi12_ = std::move(phi12);
  q.validate_common();
  if (!(phi22_scale < -kNegDefTol) || !std::isfinite(phi22_scale))
    throw ValidationError("noise model: Phi22 scale must be negative");
  q.phi22_scale_ = phi22_scale;
  return q;
}

MatrixXd NoiseModelQMI::phi22() const {
  if (phi22_dense_) return *phi22_dense_;
  return phi22_scale_ * MatrixXd::Identity(horizon_, horizon_);
}

MatrixXd NoiseModelQMI::times_phi22(const MatrixXd& b) const {
  if (phi22_dense_) return b * *phi22_dense_;
  return phi22_scale_ * b;
}

MatrixXd NoiseModelQMI::times_neg_phi22_factor(const MatrixXd& b) const {
  if (neg_phi22_factor_) return b * *neg_phi22_factor_;
  return std::sqrt(-phi22_scale_) * b;
}

MatrixXd NoiseModelQMI::quadratic_form(const MatrixXd& w) const {
  if (w.rows() != nx() || w.cols() != horizon_)
    throw ValidationError("noise model: disturbance matrix must be nx x M");
  const MatrixXd cross = w * phi12_.transpose();
  return linalg::symmetrize(phi11_ + cross + cross.transpose() + times_phi22(w) * w.transpose());
}

void NoiseModelQMI::check_dimensions(int nx_expected, int horizon_expected) const {
  if (nx() != nx_expected || horizon_ != horizon_expected) {
    std::ostringstream os;
    os << "noise model has (nx, M) = (" << nx() << ", " << horizon_ << ") but data has (" << nx_expected
       << ", " << horizon_expected << ")";
    throw ValidationError(os.str());
  }
}

NoiseModelQMI noise_model_from_bound(double wbar, int horizon, int nx) {
  if (!(wbar >= 0.0) || !std::isfinite(wbar)) throw ValidationError("noise bound wbar must be finite and >= 0");
  if (horizon < 1) throw ValidationError("noise model needs M >= 1");
  if (nx < 1) throw ValidationError("noise model needs nx >= 1");
  return NoiseModelQMI::with_scaled_identity(horizon * wbar * MatrixXd::Identity(nx, nx),
                                             MatrixXd::Zero(nx, horizon), -1.0);
}

// ---------------------------------------------------------------------------

MatrixXd build_slater_matrix_V(const DataMatrices& dm, const NoiseModelQMI& qmi) {
  check_data(dm);
  qmi.check_dimensions(dm.nx(), dm.horizon());
  const int nx = dm.nx(), nu = dm.nu();
  const int dim = 2 * nx + nu;
  MatrixXd d(dim, dm.horizon());
  d << dm.Xplus, -dm.X, -dm.U;

  MatrixXd v = qmi.times_phi22(d) * d.transpose();
  const MatrixXd cross = qmi.phi12() * d.transpose();  // nx x dim
  v.topRows(nx) += cross;
  v.leftCols(nx) += cross.transpose();
  v.topLeftCorner(nx, nx) += qmi.phi11();
  return linalg::symmetrize(v);
}

MatrixXd slater_form(const DataMatrices& dm, const NoiseModelQMI& qmi, const MatrixXd& z) {
  check_data(dm);
  if (z.rows() != dm.nx() + dm.nu() || z.cols() != dm.nx())
    throw ValidationError("Slater witness must be (nx+nu) x nx");
  const MatrixXd h = dm.Xplus - z.transpose() * stacked_regressor(dm);
  return qmi.quadratic_form(h);
}

MatrixXd least_squares_witness(const DataMatrices& dm) {
  check_data(dm);
  const MatrixXd xi = stacked_regressor(dm);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(xi.transpose());
  return cod.solve(dm.Xplus.transpose());
}

const char* to_string(SlaterMethod m) noexcept {
  switch (m) {
    case SlaterMethod::kLeastSquaresCandidate: return "least-squares-candidate";
    case SlaterMethod::kFeasibilityProgram: return "feasibility-program";
  }
  return "unknown";
}

namespace {

// max t s.t. [[Phi11 + H Phi12^T + Phi12 H^T, H C], [(H C)^T, I]] >= t I over Z,
// with H = Xplus - Z^T [X; U] and the H C factor compressed by a QR of (Y C)^T.
sdp::SdpProblem slater_program(const DataMatrices& dm, const NoiseModelQMI& qmi) {
  const int nx = dm.nx(), nu = dm.nu(), r = nx + nu;
  const int dim_y = 2 * nx + nu;
  MatrixXd y(dim_y, dm.horizon());
  y << dm.Xplus, dm.X, dm.U;

  const MatrixXd yc = qmi.times_neg_phi22_factor(y);
  Eigen::HouseholderQR<MatrixXd> qr(yc.transpose());
  const int k = static_cast<int>(std::min<Eigen::Index>(dm.horizon(), dim_y));
  const MatrixXd rfac = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const MatrixXd rt = rfac.transpose();  // dim_y x k, Y C (Y C)^T = rt rt^T
  const MatrixXd rt_top = rt.topRows(nx), rt_bottom = rt.bottomRows(r);
  const MatrixXd yp = y * qmi.phi12().transpose();  // dim_y x nx
  const MatrixXd p_top = yp.topRows(nx), p_bottom = yp.bottomRows(r);

  const int dim = nx + k;
  auto pack = [&](const MatrixXd& lin, const MatrixXd& g, double id) {
    MatrixXd f = MatrixXd::Zero(dim, dim);
    f.topLeftCorner(nx, nx) = lin;
    f.topRightCorner(nx, k) = g;
    f.bottomLeftCorner(k, nx) = g.transpose();
    f.bottomRightCorner(k, k) = id * MatrixXd::Identity(k, k);
    return sdp::svec(f);
  };

  sdp::LmiConstraint c;
  c.dim = dim;
  c.label = "slater-schur";
  c.constant = pack(qmi.phi11() + p_top + p_top.transpose(), rt_top, 1.0);
  const int nvars = r * nx;
  c.coefficients.resize(sdp::svec_length(dim), nvars);
  for (int q = 0; q < nx; ++q) {
    for (int p = 0; p < r; ++p) {
      // d/dZ(p,q) of Z^T M is e_q M.row(p).
      MatrixXd dlin = MatrixXd::Zero(nx, nx);
      dlin.row(q) = -p_bottom.row(p);
      MatrixXd dg = MatrixXd::Zero(nx, k);
      dg.row(q) = -rt_bottom.row(p);
      c.coefficients.col(q * r + p) = pack(dlin + dlin.transpose(), dg, 0.0);
    }
  }
  sdp::SdpProblem prob;
  prob.num_vars = nvars;
  prob.constraints.push_back(std::move(c));
  prob.objective.kind = sdp::ObjectiveKind::kMaxMinMargin;
  return prob;
}

}  // namespace

SlaterReport check_generalized_slater(const DataMatrices& dm, const NoiseModelQMI& qmi,
                                      const SlaterOptions& options) {
  check_data(dm);
  qmi.check_dimensions(dm.nx(), dm.horizon());
  const MatrixXd v = build_slater_matrix_V(dm, qmi);

  SlaterReport rep;
  rep.tolerance = options.tol >= 0.0 ? options.tol : linalg::psd_tolerance(v);
  {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(stacked_regressor(dm));
    rep.data_rank_deficient = cod.rank() < dm.nx() + dm.nu();
  }

  if (!options.force_program) {
    const MatrixXd z = least_squares_witness(dm);
    const double lam = linalg::min_eigenvalue(slater_form(dm, qmi, z));
    rep.method = SlaterMethod::kLeastSquaresCandidate;
    rep.min_eigenvalue = lam;
    if (lam >= -rep.tolerance) {
      rep.satisfied = true;
      rep.witness_Z = z;
      return rep;
    }
  }

  const sdp::SdpBackend& backend = options.backend ? *options.backend : sdp::default_backend();
  const sdp::SdpResult res = backend.solve(slater_program(dm, qmi));
  rep.method = SlaterMethod::kFeasibilityProgram;
  if (res.status == sdp::SdpStatus::kNumericalFailure)
    throw SolverFailure("Slater feasibility program: " + res.diagnostics.message);

  const int r = dm.nx() + dm.nu();
  MatrixXd z(r, dm.nx());
  for (int q = 0; q < dm.nx(); ++q) z.col(q) = res.y.segment(q * r, r);
  const double lam = linalg::min_eigenvalue(slater_form(dm, qmi, z));
  rep.min_eigenvalue = lam;
  rep.satisfied = lam >= -rep.tolerance;
  if (rep.satisfied) rep.witness_Z = z;
  return rep;
}

// ---------------------------------------------------------------------------

double consistency_margin(const MatrixXd& a, const MatrixXd& b, const DataMatrices& dm,
                          const NoiseModelQMI& qmi) {
  check_data(dm);
  if (a.rows() != dm.nx() || a.cols() != dm.nx() || b.rows() != dm.nx() || b.cols() != dm.nu())
    throw ValidationError("system matrices do not match the data dimensions");
  qmi.check_dimensions(dm.nx(), dm.horizon());
  const MatrixXd w = dm.Xplus - a * dm.X - b * dm.U;
  return linalg::min_eigenvalue(qmi.quadratic_form(w));
}

bool membership_consistent_set(const MatrixXd& a, const MatrixXd& b, const DataMatrices& dm,
                               const NoiseModelQMI& qmi, double tol) {
  check_data(dm);
  if (a.rows() != dm.nx() || a.cols() != dm.nx() || b.rows() != dm.nx() || b.cols() != dm.nu())
    throw ValidationError("system matrices do not match the data dimensions");
  qmi.check_dimensions(dm.nx(), dm.horizon());
  const MatrixXd w = dm.Xplus - a * dm.X - b * dm.U;
  const MatrixXd form = qmi.quadratic_form(w);
  if (tol < 0.0) {
    const MatrixXd quad = qmi.times_phi22(w) * w.transpose();
    tol = 1e-9 * (1.0 + qmi.phi11().norm() + quad.norm());
  }
  return linalg::min_eigenvalue(form) >= -tol;
}

DataFactorization factorize_data(const DataMatrices& dm, const NoiseModelQMI& qmi) {
  check_data(dm);
  qmi.check_dimensions(dm.nx(), dm.horizon());
  const int r = dm.nx() + dm.nu();
  DataFactorization f;
  if (dm.horizon() < r) return f;

  const MatrixXd xi = stacked_regressor(dm);
  const MatrixXd xi_w = qmi.times_neg_phi22_factor(xi);
  const MatrixXd xp_w = qmi.times_neg_phi22_factor(dm.Xplus);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(xi_w.transpose());
  const MatrixXd rfac = qr.matrixR().topRows(r).triangularView<Eigen::Upper>();
  const double rmax = std::abs(rfac(0, 0)), rmin = std::abs(rfac(r - 1, r - 1));
  f.regressor_condition = rmin > 0.0 ? rmax / rmin : std::numeric_limits<double>::infinity();
  if (!(f.regressor_condition < kRankConditionLimit)) return f;

  // With Xi_w^T P = Q R:  Gram = Rt^T Rt, Rt = R P^T, and S = Rt^{-T} = R^{-T} P^T.
  const auto perm = qr.colsPermutation();
  const MatrixXd q_thin = qr.householderQ() * MatrixXd::Identity(dm.horizon(), r);
  const MatrixXd rinv_t = rfac.transpose().triangularView<Eigen::Lower>().solve(MatrixXd::Identity(r, r));
  f.whitening = rinv_t * perm.transpose();

  // Theta = (Xplus_w Xi_w^T - Phi12 Xi^T) Gram^{-1}; the first term is
  // Xplus_w Q R^{-T} P^T, evaluated without forming the Gram matrix.
  MatrixXd theta = (xp_w * q_thin) * f.whitening;
  if (qmi.phi12().cwiseAbs().maxCoeff() > 0.0) {
    const MatrixXd gram_inv = f.whitening.transpose() * f.whitening;
    theta -= qmi.phi12() * xi.transpose() * gram_inv;
  }
  f.theta_hat = theta;
  f.residual_form = qmi.quadratic_form(dm.Xplus - theta * xi);
  f.full_rank = true;
  return f;
}

}  // namespace scenario_ddc
