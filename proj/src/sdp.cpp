#include "scenario_ddc/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "scenario_ddc/error.hpp"
#include "scenario_ddc/linalg.hpp"

namespace scenario_ddc::sdp {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

// Largest alpha with M + alpha dM >= 0, given the Cholesky factor of M.
double max_step(const Eigen::LLT<MatrixXd>& chol, const MatrixXd& dm) {
  if (dm.rows() == 1) {
    const double m = chol.matrixL()(0, 0) * chol.matrixL()(0, 0);
    return dm(0, 0) < 0.0 ? -m / dm(0, 0) : std::numeric_limits<double>::infinity();
  }
  const MatrixXd half = chol.matrixL().solve(dm);
  const MatrixXd w = chol.matrixL().solve(MatrixXd(half.transpose()));
  const double lambda = linalg::min_eigenvalue(w);
  return lambda < 0.0 ? -1.0 / lambda : std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::Index svec_length(int dim) noexcept {
  return static_cast<Eigen::Index>(dim) * (dim + 1) / 2;
}

VectorXd svec(const MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  VectorXd v(svec_length(d));
  Eigen::Index k = 0;
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < j; ++i) v(k++) = kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    v(k++) = m(j, j);
  }
  return v;
}

MatrixXd smat(const VectorXd& v, int dim) {
  if (v.size() != svec_length(dim)) throw ValidationError("smat: packed length does not match dimension");
  MatrixXd m(dim, dim);
  Eigen::Index k = 0;
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < j; ++i) {
      m(i, j) = m(j, i) = v(k++) / kSqrt2;
    }
    m(j, j) = v(k++);
  }
  return m;
}

MatrixXd LmiConstraint::evaluate(const VectorXd& y) const {
  return smat(constant + coefficients * y, dim);
}

void SdpProblem::validate() const {
  if (num_vars < 0) throw ValidationError("SdpProblem: negative variable count");
  for (const auto& c : constraints) {
    if (c.dim < 1) throw ValidationError("SdpProblem: constraint '" + c.label + "' has dimension < 1");
    if (c.constant.size() != svec_length(c.dim))
      throw ValidationError("SdpProblem: constraint '" + c.label + "' constant has wrong packed length");
    if (c.coefficients.rows() != svec_length(c.dim) || c.coefficients.cols() != num_vars)
      throw ValidationError("SdpProblem: constraint '" + c.label + "' coefficient block has wrong shape");
    if (!c.constant.allFinite() || !c.coefficients.allFinite())
      throw ValidationError("SdpProblem: constraint '" + c.label + "' has non-finite data");
  }
  if (objective.kind == ObjectiveKind::kLinear && objective.c.size() != num_vars)
    throw ValidationError("SdpProblem: linear objective has wrong length");
}

const char* to_string(SdpStatus s) noexcept {
  switch (s) {
    case SdpStatus::kFeasible: return "feasible";
    case SdpStatus::kInfeasible: return "infeasible";
    case SdpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

IpmResult solve_dual_form(const DualFormProblem& problem, const IpmSettings& settings,
                          const std::function<bool(const VectorXd&)>& stop) {
  const int m = problem.num_vars;
  const auto& blocks = problem.blocks;
  const std::size_t nb = blocks.size();
  const VectorXd& b = problem.objective;

  double n_total = 0.0;
  double norm_f0 = 0.0;
  for (const auto& blk : blocks) {
    n_total += blk.dim;
    norm_f0 += blk.constant.squaredNorm();
  }
  norm_f0 = std::sqrt(norm_f0);
  const double norm_b = b.norm();

  std::vector<MatrixXd> x(nb), z(nb), zinv(nb), rd(nb), dx(nb), dz(nb), dxa(nb), dza(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    const auto& blk = blocks[j];
    const double d = blk.dim;
    double max_ratio = 0.0, max_norm = blk.constant.norm();
    for (std::size_t k = 0; k < blk.vars.size(); ++k) {
      const double nf = blk.coefficients[k].norm();
      max_ratio = std::max(max_ratio, (1.0 + std::abs(b(blk.vars[k]))) / (1.0 + nf));
      max_norm = std::max(max_norm, nf);
    }
    const double xi = std::max({10.0, std::sqrt(d), d * max_ratio});
    const double eta = std::max({10.0, std::sqrt(d), max_norm}) / std::sqrt(d);
    x[j] = xi * MatrixXd::Identity(blk.dim, blk.dim);
    z[j] = eta * MatrixXd::Identity(blk.dim, blk.dim);
  }

  IpmResult res;
  res.y = VectorXd::Zero(m);
  VectorXd& y = res.y;

  std::vector<Eigen::LLT<MatrixXd>> chol_x(nb), chol_z(nb);

  for (int iter = 0;; ++iter) {
    res.iterations = iter;

    double xz = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      chol_z[j].compute(z[j]);
      chol_x[j].compute(x[j]);
      if (chol_z[j].info() != Eigen::Success || chol_x[j].info() != Eigen::Success) {
        res.status = IpmStatus::kNumericalError;
        return res;
      }
      zinv[j] = chol_z[j].solve(MatrixXd::Identity(blocks[j].dim, blocks[j].dim));
      xz += inner(x[j], z[j]);
    }
    const double mu = xz / n_total;

    VectorXd rp = -b;
    double pobj = 0.0, rd_norm2 = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const auto& blk = blocks[j];
      rd[j] = blk.constant - z[j];
      for (std::size_t k = 0; k < blk.vars.size(); ++k) {
        rd[j] += y(blk.vars[k]) * blk.coefficients[k];
        rp(blk.vars[k]) -= inner(blk.coefficients[k], x[j]);
      }
      pobj += inner(blk.constant, x[j]);
      rd_norm2 += rd[j].squaredNorm();
    }
    const double dobj = b.dot(y);
    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.primal_residual = rp.norm() / (1.0 + norm_b);
    res.dual_residual = std::sqrt(rd_norm2) / (1.0 + norm_f0);
    res.relative_gap = std::max(std::abs(pobj - dobj), xz) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (!std::isfinite(res.relative_gap) || !std::isfinite(res.primal_residual) ||
        !std::isfinite(res.dual_residual)) {
      res.status = IpmStatus::kNumericalError;
      return res;
    }

    if (stop && stop(y)) {
      res.status = IpmStatus::kStopped;
      return res;
    }
    if (res.relative_gap < settings.tol && res.primal_residual < settings.tol &&
        res.dual_residual < settings.tol) {
      res.status = IpmStatus::kOptimal;
      return res;
    }
    if (iter >= settings.max_iterations) {
      res.status = IpmStatus::kMaxIterations;
      return res;
    }

    // Schur complement H_ik = sum_j tr(F_ij X_j F_kj Z_j^{-1}) and the pieces of
    // the right-hand side that do not depend on the centering target.
    MatrixXd h = MatrixXd::Zero(m, m);
    VectorXd rhs_fixed = -rp;
    std::vector<MatrixXd> w;
    for (std::size_t j = 0; j < nb; ++j) {
      const auto& blk = blocks[j];
      const std::size_t nv = blk.vars.size();
      w.resize(nv);
      const MatrixXd q = x[j] * rd[j] * zinv[j];
      for (std::size_t k = 0; k < nv; ++k) {
        w[k].noalias() = x[j] * blk.coefficients[k] * zinv[j];
        rhs_fixed(blk.vars[k]) -= inner(blk.coefficients[k], q);
      }
      for (std::size_t k = 0; k < nv; ++k) {
        for (std::size_t l = 0; l <= k; ++l) {
          const double v = inner(blk.coefficients[l], w[k]);
          h(blk.vars[k], blk.vars[l]) += v;
          if (l != k) h(blk.vars[l], blk.vars[k]) += v;
        }
      }
    }
    h = linalg::symmetrize(h);
    Eigen::LLT<MatrixXd> hchol(h);
    if (hchol.info() != Eigen::Success) {
      const double reg = 1e-14 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
      hchol.compute(h + reg * MatrixXd::Identity(m, m));
      if (hchol.info() != Eigen::Success) {
        res.status = IpmStatus::kNumericalError;
        return res;
      }
    }

    // g_j = R_c Z^{-1}; direction from  H dy = <F_i, g> + rhs_fixed.
    auto direction = [&](const std::vector<MatrixXd>& g, std::vector<MatrixXd>& dxo,
                         std::vector<MatrixXd>& dzo) -> VectorXd {
      VectorXd rhs = rhs_fixed;
      for (std::size_t j = 0; j < nb; ++j) {
        const auto& blk = blocks[j];
        for (std::size_t k = 0; k < blk.vars.size(); ++k) rhs(blk.vars[k]) += inner(blk.coefficients[k], g[j]);
      }
      VectorXd dy = hchol.solve(rhs);
      for (std::size_t j = 0; j < nb; ++j) {
        const auto& blk = blocks[j];
        dzo[j] = rd[j];
        for (std::size_t k = 0; k < blk.vars.size(); ++k) dzo[j] += dy(blk.vars[k]) * blk.coefficients[k];
        dxo[j] = linalg::symmetrize(g[j] - x[j] * dzo[j] * zinv[j]);
      }
      return dy;
    };

    auto step_lengths = [&](const std::vector<MatrixXd>& dxo, const std::vector<MatrixXd>& dzo) {
      double ap = std::numeric_limits<double>::infinity(), ad = ap;
      for (std::size_t j = 0; j < nb; ++j) {
        ap = std::min(ap, max_step(chol_x[j], dxo[j]));
        ad = std::min(ad, max_step(chol_z[j], dzo[j]));
      }
      return std::pair{ap, ad};
    };

    std::vector<MatrixXd> g(nb);
    for (std::size_t j = 0; j < nb; ++j) g[j] = -x[j];
    const VectorXd dy_aff = direction(g, dxa, dza);
    auto [ap_aff, ad_aff] = step_lengths(dxa, dza);
    ap_aff = std::min(1.0, ap_aff);
    ad_aff = std::min(1.0, ad_aff);
    double xz_aff = 0.0;
    for (std::size_t j = 0; j < nb; ++j) xz_aff += inner(x[j] + ap_aff * dxa[j], z[j] + ad_aff * dza[j]);
    const double sigma = std::clamp(std::pow(std::max(xz_aff, 0.0) / std::max(xz, 1e-300), 3.0), 0.0, 1.0);

    for (std::size_t j = 0; j < nb; ++j) {
      g[j] = sigma * mu * zinv[j] - x[j] - dxa[j] * dza[j] * zinv[j];
    }
    const VectorXd dy = direction(g, dx, dz);
    auto [ap, ad] = step_lengths(dx, dz);
    ap = std::min(1.0, settings.step_fraction * ap);
    ad = std::min(1.0, settings.step_fraction * ad);
    if (!std::isfinite(ap) || !std::isfinite(ad) || !dy.allFinite()) {
      res.status = IpmStatus::kNumericalError;
      return res;
    }

    for (std::size_t j = 0; j < nb; ++j) {
      x[j] = linalg::symmetrize(x[j] + ap * dx[j]);
      z[j] = linalg::symmetrize(z[j] + ad * dz[j]);
    }
    y += ad * dy;
  }
}

// ---------------------------------------------------------------------------

namespace {

struct ScaledProblem {
  DualFormProblem dual;
  std::vector<double> scale;  // per original constraint
  int num_vars = 0;
};

DenseBlock to_block(const LmiConstraint& c, double scale, int num_vars) {
  DenseBlock blk;
  blk.dim = c.dim;
  blk.constant = scale * smat(c.constant, c.dim);
  for (int i = 0; i < num_vars; ++i) {
    const auto col = c.coefficients.col(i);
    if (col.cwiseAbs().maxCoeff() == 0.0) continue;
    blk.vars.push_back(i);
    blk.coefficients.push_back(scale * smat(col, c.dim));
  }
  return blk;
}

DenseBlock scalar_block(double constant, std::vector<std::pair<int, double>> terms) {
  DenseBlock blk;
  blk.dim = 1;
  blk.constant = MatrixXd::Constant(1, 1, constant);
  for (auto [v, c] : terms) {
    blk.vars.push_back(v);
    blk.coefficients.push_back(MatrixXd::Constant(1, 1, c));
  }
  return blk;
}

double constraint_scale(const LmiConstraint& c) {
  double s = smat(c.constant, c.dim).norm();
  for (Eigen::Index i = 0; i < c.coefficients.cols(); ++i) s = std::max(s, c.coefficients.col(i).norm());
  return 1.0 / std::max(1.0, s);
}

struct PointCheck {
  double min_eigenvalue = std::numeric_limits<double>::infinity();  // unscaled
  double min_scaled = std::numeric_limits<double>::infinity();
  bool feasible = true;
};

PointCheck check_point(const SdpProblem& p, const std::vector<double>& scale, const VectorXd& y,
                       double tol) {
  PointCheck pc;
  for (std::size_t j = 0; j < p.constraints.size(); ++j) {
    const MatrixXd f = p.constraints[j].evaluate(y);
    const double lam = linalg::min_eigenvalue(f);
    pc.min_eigenvalue = std::min(pc.min_eigenvalue, lam);
    pc.min_scaled = std::min(pc.min_scaled, scale[j] * lam);
    if (!(lam >= -linalg::psd_tolerance(f, tol))) pc.feasible = false;
  }
  return pc;
}

void fill_diagnostics(SdpDiagnostics& d, const IpmResult& r) {
  d.iterations += r.iterations;
  d.primal_residual = r.primal_residual;
  d.dual_residual = r.dual_residual;
  d.relative_gap = r.relative_gap;
}

}  // namespace

SdpResult InteriorPointBackend::solve(const SdpProblem& problem) const {
  problem.validate();
  const int m = problem.num_vars;
  const std::size_t nc = problem.constraints.size();

  std::vector<double> scale(nc);
  for (std::size_t j = 0; j < nc; ++j) scale[j] = constraint_scale(problem.constraints[j]);

  SdpResult out;
  out.y = VectorXd::Zero(m);

  if (nc == 0) {
    out.status = SdpStatus::kFeasible;
    out.diagnostics.message = "no constraints";
    return out;
  }

  // Margin program in (y, t); t is variable m.
  DualFormProblem phase1;
  phase1.num_vars = m + 1;
  phase1.objective = VectorXd::Zero(m + 1);
  phase1.objective(m) = 1.0;
  double lowest = 0.0;
  for (std::size_t j = 0; j < nc; ++j) {
    const auto& c = problem.constraints[j];
    DenseBlock blk = to_block(c, scale[j], m);
    lowest = std::min(lowest, linalg::min_eigenvalue(blk.constant));
    blk.vars.push_back(m);
    blk.coefficients.push_back(-MatrixXd::Identity(c.dim, c.dim));
    phase1.blocks.push_back(std::move(blk));
  }
  const double t_floor = 2.0 * (1.0 - lowest);
  phase1.blocks.push_back(scalar_block(t_floor, {{m, 1.0}}));
  for (int i = 0; i < m; ++i) {
    phase1.blocks.push_back(scalar_block(options_.box_bound, {{i, -1.0}}));
    phase1.blocks.push_back(scalar_block(options_.box_bound, {{i, 1.0}}));
  }

  IpmSettings settings{options_.gap_tol, options_.max_iterations, options_.step_fraction};
  const bool early = problem.objective.kind != ObjectiveKind::kMaxMinMargin;
  const double early_margin = options_.early_stop_margin;
  auto stop = [&](const VectorXd& yt) {
    if (!early || yt(m) <= early_margin) return false;
    const PointCheck pc = check_point(problem, scale, yt.head(m), options_.feasibility_tol);
    return pc.feasible && pc.min_scaled >= early_margin;
  };
  const IpmResult r1 = solve_dual_form(phase1, settings, stop);
  fill_diagnostics(out.diagnostics, r1);
  out.diagnostics.margin = r1.y.size() == m + 1 ? r1.y(m) : 0.0;

  const VectorXd y1 = r1.y.head(m);
  const PointCheck pc1 = check_point(problem, scale, y1, options_.feasibility_tol);
  out.diagnostics.min_eigenvalue = pc1.min_eigenvalue;

  std::ostringstream msg;
  if (pc1.feasible) {
    out.status = SdpStatus::kFeasible;
    out.y = y1;
    msg << "margin program: feasible point found (t = " << out.diagnostics.margin << ")";
  } else if ((r1.status == IpmStatus::kOptimal && out.diagnostics.margin <= options_.feasibility_tol) ||
             (r1.primal_residual < 1e-7 && r1.primal_objective < -1e-7)) {
    // Converged margin program with a nonpositive optimum, or a primal bound that
    // certifies t* < 0.
    out.status = SdpStatus::kInfeasible;
    out.y = y1;
    msg << "margin program converged to t* = " << out.diagnostics.margin << " (upper bound "
        << r1.primal_objective << ")";
  } else {
    out.status = SdpStatus::kNumericalFailure;
    out.y = y1;
    msg << "margin program did not converge (ipm status " << static_cast<int>(r1.status)
        << ", gap " << r1.relative_gap << ")";
  }

  if (out.status == SdpStatus::kFeasible && problem.objective.kind == ObjectiveKind::kLinear) {
    DualFormProblem phase2;
    phase2.num_vars = m;
    phase2.objective = problem.objective.c;
    for (std::size_t j = 0; j < nc; ++j) phase2.blocks.push_back(to_block(problem.constraints[j], scale[j], m));
    for (int i = 0; i < m; ++i) {
      phase2.blocks.push_back(scalar_block(options_.box_bound, {{i, -1.0}}));
      phase2.blocks.push_back(scalar_block(options_.box_bound, {{i, 1.0}}));
    }
    const IpmResult r2 = solve_dual_form(phase2, settings);
    fill_diagnostics(out.diagnostics, r2);
    const PointCheck pc2 = check_point(problem, scale, r2.y, options_.feasibility_tol);
    if (r2.status == IpmStatus::kOptimal && pc2.feasible) {
      out.y = r2.y;
      out.diagnostics.min_eigenvalue = pc2.min_eigenvalue;
      msg << "; linear objective optimized";
    } else {
      msg << "; linear objective phase did not verify, returning margin-program point";
    }
  }
  out.diagnostics.message = msg.str();
  return out;
}

const SdpBackend& default_backend() {
  static const InteriorPointBackend backend;
  return backend;
}

std::unique_ptr<SdpBackend> make_backend(const std::string& name, InteriorPointOptions options) {
  if (name == "interior-point" || name == "reference") return std::make_unique<InteriorPointBackend>(options);
  throw ValidationError("unknown SDP backend '" + name + "' (available: interior-point)");
}

}  // namespace scenario_ddc::sdp
