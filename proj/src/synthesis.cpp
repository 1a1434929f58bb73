#include "scenario_ddc/synthesis.hpp"

#include <cmath>
#include <sstream>

#include "scenario_ddc/error.hpp"
#include "scenario_ddc/linalg.hpp"

namespace scenario_ddc {

MatrixXd stability_block(const MatrixXd& P, const MatrixXd& L, double b) {
  const Eigen::Index nx = P.rows(), nu = L.rows();
  if (P.cols() != nx || L.cols() != nx) throw ValidationError("stability_block: P must be nx x nx and L nu x nx");
  const Eigen::Index d = 3 * nx + nu;
  MatrixXd f = MatrixXd::Zero(d, d);
  const Eigen::Index o2 = nx, o3 = 2 * nx, o4 = 2 * nx + nu;
  f.block(0, 0, nx, nx) = P - b * MatrixXd::Identity(nx, nx);
  f.block(o2, o2, nx, nx) = -P;
  f.block(o2, o3, nx, nu) = -L.transpose();
  f.block(o3, o2, nu, nx) = -L;
  f.block(o3, o4, nu, nx) = L;
  f.block(o4, o3, nx, nu) = L.transpose();
  f.block(o4, o4, nx, nx) = P;
  return f;
}

MatrixXd ScenarioConstraint::evaluate(const LmiDecision& d) const {
  return linalg::symmetrize(stability_block(d.P, d.L, d.b) - d.a * data_term);
}

MatrixXd ScenarioConstraint::evaluate_conditioned(const LmiDecision& d) const {
  if (!congruence) return evaluate(d);
  const MatrixXd& t = *congruence;
  return linalg::symmetrize(t * stability_block(d.P, d.L, d.b) * t.transpose() - d.a * conditioned_data_term);
}

ScenarioConstraint assemble_single_lmi(const DataMatrices& dm, const NoiseModelQMI& qmi, double delta) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ValidationError("delta must be finite and >= 0");
  const int nx = dm.nx(), nu = dm.nu(), r = nx + nu;
  const MatrixXd v = build_slater_matrix_V(dm, qmi);
  const int d = 3 * nx + nu;

  ScenarioConstraint c;
  c.data_term = MatrixXd::Zero(d, d);
  c.data_term.topLeftCorner(2 * nx + nu, 2 * nx + nu) = v;

  const DataFactorization fac = factorize_data(dm, qmi);
  if (fac.full_rank) {
    MatrixXd t = MatrixXd::Identity(d, d);
    t.block(0, nx, nx, r) = fac.theta_hat;
    t.block(nx, nx, r, r) = fac.whitening;
    c.congruence = t;
    c.conditioned_data_term = MatrixXd::Zero(d, d);
    c.conditioned_data_term.topLeftCorner(nx, nx) = fac.residual_form;
    c.conditioned_data_term.block(nx, nx, r, r) = -MatrixXd::Identity(r, r);
  } else {
    c.conditioned_data_term = c.data_term;
  }
  return c;
}

LmiProblem assemble_scenario_lmi(const std::vector<DataMatrices>& dms, const std::vector<NoiseModelQMI>& qmis,
                                 double delta) {
  if (dms.empty()) throw ValidationError("assemble_scenario_lmi: no trajectories");
  if (dms.size() != qmis.size()) throw ValidationError("assemble_scenario_lmi: one noise model per trajectory required");
  if (!(delta >= 0.0) || !(delta <= 1.0)) throw ValidationError("delta must lie in [0, 1] under the b = 1 normalization");
  LmiProblem prob;
  prob.nx = dms.front().nx();
  prob.nu = dms.front().nu();
  prob.delta = delta;
  prob.constraints.reserve(dms.size());
  for (std::size_t i = 0; i < dms.size(); ++i) {
    if (dms[i].nx() != prob.nx || dms[i].nu() != prob.nu) {
      std::ostringstream os;
      os << "trajectory " << i << " has (nx, nu) = (" << dms[i].nx() << ", " << dms[i].nu() << "), expected ("
         << prob.nx << ", " << prob.nu << ")";
      throw ValidationError(os.str());
    }
    ScenarioConstraint c = assemble_single_lmi(dms[i], qmis[i], delta);
    c.label = "scenario-" + std::to_string(i);
    prob.constraints.push_back(std::move(c));
  }
  return prob;
}

const char* to_string(SynthesisObjective o) noexcept {
  switch (o) {
    case SynthesisObjective::kFeasibility: return "feasibility";
    case SynthesisObjective::kMaxMargin: return "max-margin";
  }
  return "unknown";
}

SynthesisObjective synthesis_objective_from_string(const std::string& s) {
  if (s == "feasibility") return SynthesisObjective::kFeasibility;
  if (s == "max-margin") return SynthesisObjective::kMaxMargin;
  throw ValidationError("unknown synthesis objective '" + s + "' (expected feasibility or max-margin)");
}

const char* to_string(SynthesisStatus s) noexcept {
  switch (s) {
    case SynthesisStatus::kFeasible: return "ok";
    case SynthesisStatus::kInfeasible: return "infeasible";
    case SynthesisStatus::kNumericalFailure: return "solver-failure";
  }
  return "unknown";
}

MatrixXd extract_controller(const MatrixXd& P, const MatrixXd& L) {
  if (P.rows() != P.cols() || L.cols() != P.rows()) throw ValidationError("extract_controller: need P nx x nx, L nu x nx");
  const MatrixXd ps = linalg::symmetrize(P);
  Eigen::LLT<MatrixXd> llt(ps);
  if (llt.info() != Eigen::Success || !(linalg::min_eigenvalue(ps) > 0.0))
    throw ValidationError("extract_controller: P is not positive definite");
  // K P = L  <=>  P K^T = L^T.
  return llt.solve(L.transpose()).transpose();
}

StabilityMargin certify_quadratic_stability(const MatrixXd& K, const MatrixXd& P, const MatrixXd& A,
                                            const MatrixXd& B, double tol_pd) {
  const Eigen::Index nx = A.rows();
  if (A.cols() != nx || B.rows() != nx || K.rows() != B.cols() || K.cols() != nx || P.rows() != nx || P.cols() != nx)
    throw ValidationError("certify_quadratic_stability: dimension mismatch");
  const MatrixXd acl = A + B * K;
  StabilityMargin out;
  out.margin = linalg::min_eigenvalue(P - acl * P * acl.transpose());
  out.certified = out.margin > tol_pd * P.trace() / static_cast<double>(nx);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Decision vector of the normalized program: upper triangle of P (column by
// column), L column-major, then a.  b is eliminated through
// b = 1 - tr(P) - a.
struct Layout {
  int nx, nu, np, nl, n;
  Layout(int nx_, int nu_) : nx(nx_), nu(nu_), np(nx_ * (nx_ + 1) / 2), nl(nx_ * nu_), n(np + nl + 1) {}

  int a_index() const { return np + nl; }

  MatrixXd p_basis(int k) const {
    MatrixXd e = MatrixXd::Zero(nx, nx);
    int idx = 0;
    for (int j = 0; j < nx; ++j)
      for (int i = 0; i <= j; ++i, ++idx)
        if (idx == k) {
          e(i, j) = 1.0;
          e(j, i) = 1.0;
          return e;
        }
    return e;
  }

  MatrixXd l_basis(int k) const {
    MatrixXd e = MatrixXd::Zero(nu, nx);
    e(k % nu, k / nu) = 1.0;
    return e;
  }

  LmiDecision decode(const VectorXd& y) const {
    LmiDecision d;
    d.P = MatrixXd::Zero(nx, nx);
    for (int k = 0; k < np; ++k) d.P += y(k) * p_basis(k);
    d.L = Eigen::Map<const MatrixXd>(y.data() + np, nu, nx);
    d.a = y(a_index());
    d.b = 1.0 - d.P.trace() - d.a;
    return d;
  }
};

// Affine map y -> lin(P, L, a, b(y)) for a form that is linear in the record.
template <class Form>
sdp::LmiConstraint affine_constraint(const Layout& lay, int dim, Form&& lin, const std::string& label) {
  auto zero = [&] {
    LmiDecision d;
    d.P = MatrixXd::Zero(lay.nx, lay.nx);
    d.L = MatrixXd::Zero(lay.nu, lay.nx);
    d.a = 0.0;
    d.b = 0.0;
    return d;
  };
  sdp::LmiConstraint c;
  c.dim = dim;
  c.label = label;
  LmiDecision unit_b = zero();
  unit_b.b = 1.0;
  const MatrixXd f_b = lin(unit_b);
  c.constant = sdp::svec(f_b);
  c.coefficients.resize(sdp::svec_length(dim), lay.n);
  for (int k = 0; k < lay.np; ++k) {
    LmiDecision d = zero();
    d.P = lay.p_basis(k);
    const double tr = d.P.trace();
    c.coefficients.col(k) = sdp::svec(lin(d) - tr * f_b);
  }
  for (int k = 0; k < lay.nl; ++k) {
    LmiDecision d = zero();
    d.L = lay.l_basis(k);
    c.coefficients.col(lay.np + k) = sdp::svec(lin(d));
  }
  LmiDecision da = zero();
  da.a = 1.0;
  c.coefficients.col(lay.a_index()) = sdp::svec(lin(da) - f_b);
  return c;
}

sdp::SdpProblem normalized_program(const LmiProblem& prob, bool conditioned, SynthesisObjective objective) {
  const Layout lay(prob.nx, prob.nu);
  sdp::SdpProblem sp;
  sp.num_vars = lay.n;
  sp.objective.kind =
      objective == SynthesisObjective::kMaxMargin ? sdp::ObjectiveKind::kMaxMinMargin : sdp::ObjectiveKind::kFeasibility;
  for (const auto& sc : prob.constraints) {
    if (conditioned)
      sp.constraints.push_back(affine_constraint(
          lay, sc.dim(), [&](const LmiDecision& d) { return sc.evaluate_conditioned(d); }, sc.label));
    else
      sp.constraints.push_back(
          affine_constraint(lay, sc.dim(), [&](const LmiDecision& d) { return sc.evaluate(d); }, sc.label));
  }
  const double delta = prob.delta;
  sp.constraints.push_back(affine_constraint(
      lay, prob.nx,
      [&](const LmiDecision& d) { return MatrixXd(d.P - delta * d.b * MatrixXd::Identity(prob.nx, prob.nx)); },
      "P >= delta b I"));
  sp.constraints.push_back(
      affine_constraint(lay, 1, [](const LmiDecision& d) { return MatrixXd::Constant(1, 1, d.b); }, "b >= 0"));
  sp.constraints.push_back(
      affine_constraint(lay, 1, [](const LmiDecision& d) { return MatrixXd::Constant(1, 1, d.a); }, "a >= 0"));
  return sp;
}

bool any_conditioned(const LmiProblem& prob) {
  for (const auto& c : prob.constraints)
    if (c.congruence) return true;
  return false;
}

}  // namespace

std::optional<std::string> verify_certificate(const LmiProblem& prob, SynthesisCertificate& cert,
                                              const SynthesisOptions& options) {
  std::ostringstream os;
  const LmiDecision d{cert.P, cert.L, cert.a, cert.b};
  if (!cert.P.allFinite() || !cert.L.allFinite() || !std::isfinite(cert.a) || !std::isfinite(cert.b))
    return std::string("certificate has non-finite entries");
  if ((cert.P - cert.P.transpose()).norm() > 1e-12 * (1.0 + cert.P.norm())) return std::string("P is not symmetric");
  const double p_min = linalg::min_eigenvalue(cert.P);
  if (!(p_min >= prob.delta - linalg::psd_tolerance(cert.P, options.tol_psd))) {
    os << "P >= delta I fails (lambda_min(P) = " << p_min << ", delta = " << prob.delta << ")";
    return os.str();
  }
  if (!(p_min > 0.0)) return std::string("P is not positive definite");
  if (!(cert.a >= 0.0)) return std::string("a is negative");
  if (!(cert.b >= prob.delta) || !(cert.b > 0.0)) return std::string("b < delta");

  const MatrixXd resid = cert.K * cert.P - cert.L;
  if (!(resid.norm() <= options.tol_lin * (1.0 + cert.L.norm()) * (1.0 + cert.P.norm()))) {
    os << "K P = L residual " << resid.norm() << " too large";
    return os.str();
  }

  cert.per_scenario_margins.clear();
  cert.per_scenario_margins.reserve(prob.constraints.size());
  std::optional<std::string> failure;
  for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
    const auto& sc = prob.constraints[i];
    const MatrixXd f = sc.evaluate(d);
    const double lam = linalg::min_eigenvalue(f);
    cert.per_scenario_margins.push_back(lam);
    if (!failure && !(lam >= -linalg::psd_tolerance(f, options.tol_psd))) {
      os << sc.label << ": lambda_min = " << lam;
      failure = os.str();
    }
    if (!failure && sc.congruence) {
      const MatrixXd fc = sc.evaluate_conditioned(d);
      const double lc = linalg::min_eigenvalue(fc);
      if (!(lc >= -linalg::psd_tolerance(fc, options.tol_psd))) {
        os << sc.label << " (conditioned form): lambda_min = " << lc;
        failure = os.str();
      }
    }
  }
  return failure;
}

namespace {

struct Attempt {
  sdp::SdpResult sdp;
  std::optional<SynthesisCertificate> cert;
  std::string problem;  // why no certificate came out of a backend "feasible"
};

Attempt attempt(const LmiProblem& prob, const sdp::SdpBackend& backend, const SynthesisOptions& options,
                bool conditioned, SynthesisObjective objective) {
  Attempt at;
  at.sdp = backend.solve(normalized_program(prob, conditioned, objective));
  if (at.sdp.status != sdp::SdpStatus::kFeasible) return at;
  if (!(at.sdp.diagnostics.margin > 0.0)) {
    at.problem = "no strictly feasible point (normalized margin is not positive)";
    return at;
  }
  const Layout lay(prob.nx, prob.nu);
  const LmiDecision h = lay.decode(at.sdp.y);
  if (!(h.b > 0.0)) {
    at.problem = "normalized solution has b <= 0";
    return at;
  }
  SynthesisCertificate cert;
  cert.P = linalg::symmetrize(h.P / h.b);
  cert.L = h.L / h.b;
  cert.a = std::max(0.0, h.a / h.b);
  cert.b = 1.0;
  cert.delta = prob.delta;
  try {
    cert.K = extract_controller(cert.P, cert.L);
  } catch (const ValidationError& e) {
    at.problem = e.what();
    return at;
  }
  if (auto why = verify_certificate(prob, cert, options)) {
    at.problem = "post-hoc verification failed: " + *why;
    return at;
  }
  at.cert = std::move(cert);
  return at;
}

}  // namespace

SynthesisResult solve_feasibility(const LmiProblem& prob, const sdp::SdpBackend& backend,
                                  const SynthesisOptions& options) {
  if (prob.constraints.empty()) throw ValidationError("solve_feasibility: problem has no scenario constraints");
  if (prob.nx < 1 || prob.nu < 1) throw ValidationError("solve_feasibility: invalid dimensions");
  for (const auto& c : prob.constraints)
    if (c.dim() != prob.dim()) throw ValidationError("solve_feasibility: constraint size mismatch");

  SynthesisResult out;
  out.diagnostics.backend_name = backend.name();
  std::vector<std::string> retries;
  bool conditioned = options.use_conditioning && any_conditioned(prob);

  Attempt at = attempt(prob, backend, options, conditioned, options.objective);
  if (at.sdp.status == sdp::SdpStatus::kNumericalFailure && conditioned) {
    retries.emplace_back("unconditioned-retry");
    conditioned = false;
    at = attempt(prob, backend, options, conditioned, options.objective);
  }
  if (at.sdp.status == sdp::SdpStatus::kFeasible && !at.cert && options.objective != SynthesisObjective::kMaxMargin) {
    retries.emplace_back("max-margin-retry");
    Attempt again = attempt(prob, backend, options, conditioned, SynthesisObjective::kMaxMargin);
    if (again.sdp.status != sdp::SdpStatus::kNumericalFailure) at = std::move(again);
  }

  out.diagnostics.backend = at.sdp.diagnostics;
  out.diagnostics.normalized_margin = at.sdp.diagnostics.margin;
  out.diagnostics.conditioned = conditioned;
  for (std::size_t i = 0; i < retries.size(); ++i) out.diagnostics.relaxation += (i ? "," : "") + retries[i];

  switch (at.sdp.status) {
    case sdp::SdpStatus::kNumericalFailure:
      out.status = SynthesisStatus::kNumericalFailure;
      out.diagnostics.message = at.sdp.diagnostics.message;
      break;
    case sdp::SdpStatus::kInfeasible:
      out.status = SynthesisStatus::kInfeasible;
      out.diagnostics.message = at.sdp.diagnostics.message;
      break;
    case sdp::SdpStatus::kFeasible:
      if (at.cert) {
        out.status = SynthesisStatus::kFeasible;
        out.certificate = std::move(at.cert);
        out.diagnostics.message = at.sdp.diagnostics.message;
      } else if (at.problem.rfind("no strictly", 0) == 0 || at.problem.rfind("normalized solution", 0) == 0) {
        out.status = SynthesisStatus::kInfeasible;
        out.diagnostics.message = at.problem;
      } else {
        out.status = SynthesisStatus::kNumericalFailure;
        out.diagnostics.message = at.problem;
      }
      break;
  }
  return out;
}

}  // namespace scenario_ddc
