#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "scenario_ddc/data_model.hpp"
#include "scenario_ddc/fleet.hpp"

namespace scenario_ddc {

[[nodiscard]] double spectral_radius(const MatrixXd& a);

struct ValidationReport {
  int n_test = 0;
  int n_unstable_spectral = 0;
  int n_violating_quadratic = 0;
  double alpha_hat_spectral = 0.0;
  double alpha_hat_quadratic = 0.0;
  std::uint64_t seed = 0;
};

/// Draws n_test fresh systems (system j from derive_seed(seed, j)) and counts
/// rho(A + B K) >= 1 and failures of the shared-P quadratic test. A system
/// that fails the spectral test is counted as a quadratic violation too.
[[nodiscard]] ValidationReport estimate_alpha(const MatrixXd& K, const MatrixXd& P, const FleetDistribution& dist,
                                              int n_test, std::uint64_t seed, double tol_pd = 1e-9);

struct RasterWindow {
  double a_min = 0.4, a_max = 1.4;
  double b_min = 0.9, b_max = 1.9;
};

/// Membership of grid nodes a_i = a_min + i (a_max - a_min) / (res - 1), same for b.
struct ConsistentSetRaster {
  RasterWindow window;
  int resolution = 0;
  std::vector<std::uint8_t> mask;  // index i * resolution + j  (i over a, j over b)
  int M = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] double a_at(int i) const;
  [[nodiscard]] double b_at(int j) const;
  [[nodiscard]] bool inside(int i, int j) const { return mask[static_cast<std::size_t>(i) * resolution + j] != 0; }
  [[nodiscard]] int count() const;
  /// Index pair of the node closest to (a, b).
  [[nodiscard]] std::pair<int, int> nearest_node(double a, double b) const;
  /// Mean (a, b) of the inside nodes. Throws ValidationError for an empty mask.
  [[nodiscard]] Eigen::Vector2d centroid() const;
  /// count() times the node spacing area.
  [[nodiscard]] double area() const;
};

/// Pointwise membership_consistent_set over the grid; nx = nu = 1 only.
[[nodiscard]] ConsistentSetRaster consistent_set_raster_1d(const DataMatrices& dm, const NoiseModelQMI& qmi,
                                                           const RasterWindow& window, int resolution);

/// Root-mean-square distance of the raster centroids from their mean.
[[nodiscard]] double centroid_dispersion(const std::vector<ConsistentSetRaster>& rasters);

/// Population variance of the raster areas.
[[nodiscard]] double area_variance(const std::vector<ConsistentSetRaster>& rasters);

}  // namespace scenario_ddc
