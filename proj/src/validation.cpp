#include "scenario_ddc/validation.hpp"

#include <cmath>

#include "scenario_ddc/error.hpp"
#include "scenario_ddc/rng.hpp"
#include "scenario_ddc/synthesis.hpp"

namespace scenario_ddc {

double spectral_radius(const MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw ValidationError("spectral_radius: need a nonempty square matrix");
  if (!a.allFinite()) throw ValidationError("spectral_radius: non-finite entries");
  if (a.rows() == 1) return std::abs(a(0, 0));
  Eigen::EigenSolver<MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) throw SolverFailure("spectral_radius: eigenvalue iteration failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

ValidationReport estimate_alpha(const MatrixXd& K, const MatrixXd& P, const FleetDistribution& dist, int n_test,
                                std::uint64_t seed, double tol_pd) {
  if (n_test < 1) throw ValidationError("estimate_alpha: n_test must be >= 1");
  if (K.rows() != dist.nu() || K.cols() != dist.nx() || P.rows() != dist.nx() || P.cols() != dist.nx())
    throw ValidationError("estimate_alpha: K or P does not match the fleet dimensions");
  ValidationReport rep;
  rep.n_test = n_test;
  rep.seed = seed;
  for (int j = 0; j < n_test; ++j) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    const SystemSample s = sample_system(dist, rng);
    const bool unstable = spectral_radius(s.A + s.B * K) >= 1.0;
    const bool certified = certify_quadratic_stability(K, P, s.A, s.B, tol_pd).certified;
    rep.n_unstable_spectral += unstable ? 1 : 0;
    rep.n_violating_quadratic += (unstable || !certified) ? 1 : 0;
  }
  rep.alpha_hat_spectral = static_cast<double>(rep.n_unstable_spectral) / n_test;
  rep.alpha_hat_quadratic = static_cast<double>(rep.n_violating_quadratic) / n_test;
  return rep;
}

double ConsistentSetRaster::a_at(int i) const {
  return window.a_min + i * (window.a_max - window.a_min) / (resolution - 1);
}

double ConsistentSetRaster::b_at(int j) const {
  return window.b_min + j * (window.b_max - window.b_min) / (resolution - 1);
}

int ConsistentSetRaster::count() const {
  int c = 0;
  for (auto m : mask) c += m ? 1 : 0;
  return c;
}

std::pair<int, int> ConsistentSetRaster::nearest_node(double a, double b) const {
  auto idx = [&](double v, double lo, double hi) {
    const double t = (v - lo) / (hi - lo) * (resolution - 1);
    return static_cast<int>(std::clamp(std::lround(t), 0L, static_cast<long>(resolution - 1)));
  };
  return {idx(a, window.a_min, window.a_max), idx(b, window.b_min, window.b_max)};
}

Eigen::Vector2d ConsistentSetRaster::centroid() const {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  int n = 0;
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j)
      if (inside(i, j)) {
        sum += Eigen::Vector2d(a_at(i), b_at(j));
        ++n;
      }
  if (n == 0) throw ValidationError("raster centroid: the mask is empty");
  return sum / n;
}

double ConsistentSetRaster::area() const {
  const double da = (window.a_max - window.a_min) / (resolution - 1);
  const double db = (window.b_max - window.b_min) / (resolution - 1);
  return count() * da * db;
}

ConsistentSetRaster consistent_set_raster_1d(const DataMatrices& dm, const NoiseModelQMI& qmi,
                                             const RasterWindow& window, int resolution) {
  if (dm.nx() != 1 || dm.nu() != 1) throw ValidationError("consistent_set_raster_1d: only scalar systems (nx = nu = 1)");
  if (resolution < 2) throw ValidationError("consistent_set_raster_1d: resolution must be >= 2");
  if (!(window.a_max > window.a_min) || !(window.b_max > window.b_min))
    throw ValidationError("consistent_set_raster_1d: empty window");
  qmi.check_dimensions(dm.nx(), dm.horizon());
  ConsistentSetRaster r;
  r.window = window;
  r.resolution = resolution;
  r.M = dm.horizon();
  r.mask.assign(static_cast<std::size_t>(resolution) * resolution, 0);
  MatrixXd a(1, 1), b(1, 1);
  for (int i = 0; i < resolution; ++i) {
    a(0, 0) = r.a_at(i);
    for (int j = 0; j < resolution; ++j) {
      b(0, 0) = r.b_at(j);
      r.mask[static_cast<std::size_t>(i) * resolution + j] = membership_consistent_set(a, b, dm, qmi) ? 1 : 0;
    }
  }
  return r;
}

namespace {

void check_same_grid(const std::vector<ConsistentSetRaster>& rasters) {
  if (rasters.size() < 2) throw ValidationError("dispersion needs at least two rasters");
  const auto& f = rasters.front();
  for (const auto& r : rasters)
    if (r.resolution != f.resolution || r.window.a_min != f.window.a_min || r.window.a_max != f.window.a_max ||
        r.window.b_min != f.window.b_min || r.window.b_max != f.window.b_max)
      throw ValidationError("dispersion: rasters are not on the same grid");
}

}  // namespace

double centroid_dispersion(const std::vector<ConsistentSetRaster>& rasters) {
  check_same_grid(rasters);
  std::vector<Eigen::Vector2d> c;
  c.reserve(rasters.size());
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& r : rasters) {
    c.push_back(r.centroid());
    mean += c.back();
  }
  mean /= static_cast<double>(c.size());
  double ss = 0.0;
  for (const auto& v : c) ss += (v - mean).squaredNorm();
  return std::sqrt(ss / static_cast<double>(c.size()));
}

double area_variance(const std::vector<ConsistentSetRaster>& rasters) {
  check_same_grid(rasters);
  double mean = 0.0;
  for (const auto& r : rasters) mean += r.area();
  mean /= static_cast<double>(rasters.size());
  double ss = 0.0;
  for (const auto& r : rasters) ss += (r.area() - mean) * (r.area() - mean);
  return ss / static_cast<double>(rasters.size());
}

}  // namespace scenario_ddc
