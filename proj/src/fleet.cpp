#include "scenario_ddc/fleet.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "scenario_ddc/linalg.hpp"

namespace scenario_ddc {

const char* to_string(TruncationKind t) noexcept {
  return t == TruncationKind::kEllipsoid ? "ellipsoid" : "box";
}

TruncationKind truncation_from_string(const std::string& s) {
  if (s == "ellipsoid") return TruncationKind::kEllipsoid;
  if (s == "box") return TruncationKind::kBox;
  throw ValidationError("unknown truncation '" + s + "' (expected ellipsoid or box)");
}

FleetDistribution::FleetDistribution(int nx, int nu, VectorXd mu, MatrixXd sigma, TruncationKind truncation,
                                     double mass)
    : nx_(nx), nu_(nu), mu_(std::move(mu)), sigma_(std::move(sigma)), truncation_(truncation), mass_(mass) {
  if (nx_ < 1 || nu_ < 1) throw ValidationError("fleet: nx and nu must be >= 1");
  const int d = dim();
  if (mu_.size() != d) throw ValidationError("fleet: mu must have nx*(nx+nu) entries");
  if (sigma_.rows() != d || sigma_.cols() != d) throw ValidationError("fleet: Sigma must be square of size nx*(nx+nu)");
  if (!mu_.allFinite() || !sigma_.allFinite()) throw ValidationError("fleet: non-finite parameters");
  if ((sigma_ - sigma_.transpose()).norm() > 1e-12 * (1.0 + sigma_.norm()))
    throw ValidationError("fleet: Sigma must be symmetric");
  if (!(mass_ > 0.0 && mass_ < 1.0)) throw ValidationError("fleet: truncation mass must lie in (0, 1)");

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(linalg::symmetrize(sigma_));
  const VectorXd lam = es.eigenvalues();
  const double top = lam.maxCoeff();
  if (lam.minCoeff() < -1e-12 * (1.0 + std::abs(top))) throw ValidationError("fleet: Sigma must be positive semidefinite");
  std::vector<int> keep;
  for (int i = 0; i < d; ++i)
    if (top > 0.0 && lam(i) > 1e-12 * top) keep.push_back(i);
  rank_ = static_cast<int>(keep.size());
  root_.resize(d, rank_);
  pinv_root_.resize(rank_, d);
  for (int k = 0; k < rank_; ++k) {
    const double s = std::sqrt(lam(keep[k]));
    root_.col(k) = s * es.eigenvectors().col(keep[k]);
    pinv_root_.row(k) = es.eigenvectors().col(keep[k]).transpose() / s;
  }
  level_ = rank_ > 0 ? boost::math::quantile(boost::math::chi_squared(rank_), mass_) : 0.0;
  const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + mass_));
  half_widths_ = z * sigma_.diagonal().cwiseMax(0.0).cwiseSqrt();
}

double FleetDistribution::mahalanobis2(const VectorXd& theta) const {
  if (theta.size() != dim()) throw ValidationError("fleet: parameter vector has the wrong size");
  if (rank_ == 0) return 0.0;
  return (pinv_root_ * (theta - mu_)).squaredNorm();
}

bool FleetDistribution::in_support(const VectorXd& theta) const {
  if (truncation_ == TruncationKind::kEllipsoid) {
    // A singular Sigma supports only mu + range(Sigma).
    const VectorXd d = theta - mu_;
    const VectorXd off_range = d - root_ * (pinv_root_ * d);
    if (off_range.norm() > 1e-9 * (1.0 + d.norm())) return false;
    return mahalanobis2(theta) <= level_;
  }
  return ((theta - mu_).cwiseAbs().array() <= half_widths_.array()).all();
}

void FleetDistribution::raw_draw(Rng& rng, VectorXd& theta, double& m2) const {
  VectorXd z(rank_);
  for (int k = 0; k < rank_; ++k) z(k) = rng.normal();
  theta = mu_ + root_ * z;
  m2 = z.squaredNorm();
}

MatrixXd benchmark_A() {
  MatrixXd a(3, 3);
  a << 1.01, 0.01, 0.0,
       0.01, 1.01, 0.01,
       0.0, 0.01, 1.01;
  return a;
}

MatrixXd benchmark_B() { return MatrixXd::Identity(3, 3); }

FleetDistribution default_benchmark_fleet(double sigma2, TruncationKind truncation) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ValidationError("sigma2 must be finite and > 0");
  const int d = 18;
  const MatrixXd sigma = sigma2 * (0.5 * MatrixXd::Identity(d, d) + 0.5 * MatrixXd::Ones(d, d));
  return FleetDistribution(3, 3, vec_system(benchmark_A(), benchmark_B()), sigma, truncation, 0.95);
}

VectorXd vec_system(const MatrixXd& A, const MatrixXd& B) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) throw ValidationError("vec_system: A must be nx x nx, B nx x nu");
  VectorXd theta(A.size() + B.size());
  theta << Eigen::Map<const VectorXd>(A.data(), A.size()), Eigen::Map<const VectorXd>(B.data(), B.size());
  return theta;
}

SystemSample unvec_system(const VectorXd& theta, int nx, int nu) {
  if (theta.size() != nx * (nx + nu)) throw ValidationError("unvec_system: wrong parameter count");
  SystemSample s;
  s.A = Eigen::Map<const MatrixXd>(theta.data(), nx, nx);
  s.B = Eigen::Map<const MatrixXd>(theta.data() + nx * nx, nx, nu);
  return s;
}

SystemSample sample_system(const FleetDistribution& dist, Rng& rng) {
  VectorXd theta;
  double m2 = 0.0;
  for (std::uint64_t draw = 1; draw <= kMaxRejectionDraws; ++draw) {
    dist.raw_draw(rng, theta, m2);
    if (dist.in_support(theta)) {
      SystemSample s = unvec_system(theta, dist.nx(), dist.nu());
      s.draw_index = draw;
      return s;
    }
  }
  throw SamplingError("sample_system: no draw accepted within the rejection cap");
}

VectorXd sample_noise(double wbar, int nx, Rng& rng) {
  if (!(wbar >= 0.0) || !std::isfinite(wbar)) throw ValidationError("sample_noise: wbar must be finite and >= 0");
  if (nx < 1) throw ValidationError("sample_noise: nx must be >= 1");
  if (wbar == 0.0) return VectorXd::Zero(nx);
  VectorXd dir(nx);
  double n2 = 0.0;
  do {
    for (int i = 0; i < nx; ++i) dir(i) = rng.normal();
    n2 = dir.squaredNorm();
  } while (!(n2 > 0.0));
  const double radius = std::sqrt(wbar) * std::pow(rng.uniform(), 1.0 / nx);
  VectorXd w = (radius / std::sqrt(n2)) * dir;
  // Rounding may push a draw on the sphere a hair outside the ball.
  const double sq = w.squaredNorm();
  if (sq > wbar) w *= std::sqrt(wbar / sq) * (1.0 - 4e-16);
  return w;
}

const char* to_string(InputLawKind k) noexcept {
  return k == InputLawKind::kUniformBox ? "uniform-box" : "gaussian";
}
const char* to_string(X0LawKind k) noexcept { return k == X0LawKind::kUniformBox ? "uniform-box" : "fixed"; }
const char* to_string(OverflowPolicy p) noexcept { return p == OverflowPolicy::kError ? "error" : "truncate"; }

void RolloutConfig::validate(int nx) const {
  if (M < 1) throw ValidationError("rollout: M must be >= 1");
  if (!(wbar >= 0.0) || !std::isfinite(wbar)) throw ValidationError("rollout: wbar must be finite and >= 0");
  if (!(input_law.scale > 0.0) || !std::isfinite(input_law.scale))
    throw ValidationError("rollout: input law scale must be > 0");
  if (x0_law.kind == X0LawKind::kUniformBox) {
    if (!(x0_law.magnitude > 0.0) || !std::isfinite(x0_law.magnitude))
      throw ValidationError("rollout: x0 magnitude must be > 0");
  } else if (x0_law.fixed.size() != nx || !x0_law.fixed.allFinite()) {
    throw ValidationError("rollout: fixed x0 must be a finite vector of length nx");
  }
}

namespace {

VectorXd draw_input(const InputLaw& law, int nu, Rng& rng) {
  VectorXd u(nu);
  for (int i = 0; i < nu; ++i)
    u(i) = law.kind == InputLawKind::kUniformBox ? rng.uniform(-law.scale, law.scale) : law.scale * rng.normal();
  return u;
}

}  // namespace

Rollout simulate_rollout(const SystemSample& theta, const RolloutConfig& cfg, Rng& rng) {
  const int nx = static_cast<int>(theta.A.rows());
  const int nu = static_cast<int>(theta.B.cols());
  if (theta.A.cols() != nx || theta.B.rows() != nx || nx < 1 || nu < 1)
    throw ValidationError("simulate: A must be nx x nx and B nx x nu");
  if (!theta.A.allFinite() || !theta.B.allFinite()) throw ValidationError("simulate: non-finite system matrices");
  cfg.validate(nx);

  Rollout out;
  Trajectory& tr = out.trajectory;
  tr.states.resize(nx, cfg.M + 1);
  tr.inputs.resize(nu, cfg.M + 1);
  out.noise.resize(nx, cfg.M);

  if (cfg.x0_law.kind == X0LawKind::kFixed) {
    tr.states.col(0) = cfg.x0_law.fixed;
  } else {
    for (int i = 0; i < nx; ++i) tr.states(i, 0) = rng.uniform(-cfg.x0_law.magnitude, cfg.x0_law.magnitude);
  }

  for (int k = 0; k < cfg.M; ++k) {
    tr.inputs.col(k) = draw_input(cfg.input_law, nu, rng);
    out.noise.col(k) = sample_noise(cfg.wbar, nx, rng);
    const VectorXd next = theta.A * tr.states.col(k) + theta.B * tr.inputs.col(k) + out.noise.col(k);
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kStateOverflowLimit) {
      std::ostringstream os;
      os << "rollout overflow at step " << k + 1 << " (state magnitude exceeds " << kStateOverflowLimit
         << "); the open loop explodes, shorten M or resample";
      if (cfg.overflow == OverflowPolicy::kError || k == 0) throw SamplingError(os.str());
      tr.states.conservativeResize(nx, k + 1);
      tr.inputs.conservativeResize(nu, k + 1);
      out.noise.conservativeResize(nx, k);
      out.truncated = true;
      return out;
    }
    tr.states.col(k + 1) = next;
  }
  tr.inputs.col(cfg.M) = draw_input(cfg.input_law, nu, rng);
  return out;
}

Trajectory simulate_trajectory(const SystemSample& theta, const RolloutConfig& cfg, Rng& rng) {
  return simulate_rollout(theta, cfg, rng).trajectory;
}

Trajectory simulate_trajectory(const SystemSample& theta, const RolloutConfig& cfg) {
  Rng rng(cfg.seed);
  return simulate_trajectory(theta, cfg, rng);
}

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t i) noexcept { return derive_seed(master_seed, i); }
std::uint64_t system_stream(std::uint64_t seed) noexcept { return derive_seed(seed, 0); }
std::uint64_t rollout_stream(std::uint64_t seed, std::uint64_t attempt) noexcept {
  return derive_seed(seed, {1, attempt});
}

Rollout record_rollout(const SystemSample& theta, const RolloutConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_rollout(theta, cfg, rng);
}

GeneratedDataset generate_dataset(const FleetDistribution& dist, int N, const RolloutConfig& cfg,
                                  std::uint64_t master_seed) {
  if (N < 1) throw ValidationError("generate_dataset: N must be >= 1");
  cfg.validate(dist.nx());
  GeneratedDataset ds;
  ds.nx = dist.nx();
  ds.nu = dist.nu();
  ds.trajectories.reserve(N);
  ds.systems.reserve(N);
  for (int i = 0; i < N; ++i) {
    const std::uint64_t seed = trajectory_seed(master_seed, static_cast<std::uint64_t>(i));
    Rng sys_rng(system_stream(seed));
    SystemSample sys = sample_system(dist, sys_rng);
    Rollout ro = record_rollout(sys, cfg, rollout_stream(seed, 0));
    ro.trajectory.system_id = "sys-" + std::to_string(i);
    ro.trajectory.seed = seed;
    ds.trajectories.push_back(std::move(ro.trajectory));
    ds.systems.push_back(std::move(sys));
    ds.seeds.push_back(seed);
  }
  return ds;
}

}  // namespace scenario_ddc
