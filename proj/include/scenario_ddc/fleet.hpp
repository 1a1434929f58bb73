#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scenario_ddc/data_model.hpp"
#include "scenario_ddc/error.hpp"
#include "scenario_ddc/rng.hpp"

namespace scenario_ddc {

enum class TruncationKind {
  kEllipsoid,  // (theta - mu)^T Sigma^+ (theta - mu) <= chi2 quantile(rank, mass)
  kBox,        // every component inside its own central `mass` interval
};

[[nodiscard]] const char* to_string(TruncationKind t) noexcept;
[[nodiscard]] TruncationKind truncation_from_string(const std::string& s);

/// Truncated normal law over theta = vec([A B]) (column-major).
class FleetDistribution {
 public:
  FleetDistribution(int nx, int nu, VectorXd mu, MatrixXd sigma, TruncationKind truncation = TruncationKind::kEllipsoid,
                    double mass = 0.95);

  [[nodiscard]] int nx() const noexcept { return nx_; }
  [[nodiscard]] int nu() const noexcept { return nu_; }
  [[nodiscard]] int dim() const noexcept { return nx_ * (nx_ + nu_); }
  [[nodiscard]] const VectorXd& mu() const noexcept { return mu_; }
  [[nodiscard]] const MatrixXd& sigma() const noexcept { return sigma_; }
  [[nodiscard]] TruncationKind truncation() const noexcept { return truncation_; }
  [[nodiscard]] double mass() const noexcept { return mass_; }

  /// Numerical rank of Sigma (eigenvalues above 1e-12 of the largest).
  [[nodiscard]] int rank() const noexcept { return rank_; }
  /// Ellipsoid radius^2: chi-square quantile with rank() degrees of freedom.
  [[nodiscard]] double level() const noexcept { return level_; }
  /// Box half-widths per component.
  [[nodiscard]] const VectorXd& half_widths() const noexcept { return half_widths_; }

  /// (theta - mu)^T Sigma^+ (theta - mu).
  [[nodiscard]] double mahalanobis2(const VectorXd& theta) const;
  [[nodiscard]] bool in_support(const VectorXd& theta) const;

  /// One untruncated draw together with its Mahalanobis distance (computed
  /// from the standard-normal coordinates, so no inverse is formed).
  void raw_draw(Rng& rng, VectorXd& theta, double& m2) const;

 private:
  int nx_, nu_;
  VectorXd mu_;
  MatrixXd sigma_;
  TruncationKind truncation_;
  double mass_;
  MatrixXd root_;          // dim x rank, Sigma = root root^T
  MatrixXd pinv_root_;     // rank x dim, maps theta - mu to standard coordinates
  int rank_ = 0;
  double level_ = 0.0;
  VectorXd half_widths_;
};

/// A-bar from the benchmark, B-bar = I, Sigma = sigma2 (0.5 I + 0.5 J).
[[nodiscard]] FleetDistribution default_benchmark_fleet(double sigma2,
                                                        TruncationKind truncation = TruncationKind::kEllipsoid);

[[nodiscard]] MatrixXd benchmark_A();
[[nodiscard]] MatrixXd benchmark_B();

struct SystemSample {
  MatrixXd A;
  MatrixXd B;
  std::uint64_t draw_index = 0;  // raw draws consumed, including rejected ones
};

/// theta = vec([A B]) column-major and back.
[[nodiscard]] VectorXd vec_system(const MatrixXd& A, const MatrixXd& B);
[[nodiscard]] SystemSample unvec_system(const VectorXd& theta, int nx, int nu);

inline constexpr std::uint64_t kMaxRejectionDraws = 1000000;

/// Rejection sampling from the untruncated normal. Throws SamplingError after
/// kMaxRejectionDraws rejected draws.
[[nodiscard]] SystemSample sample_system(const FleetDistribution& dist, Rng& rng);

/// Uniform draw from the closed ball of radius sqrt(wbar) in R^nx.
[[nodiscard]] VectorXd sample_noise(double wbar, int nx, Rng& rng);

enum class InputLawKind { kUniformBox, kGaussian };
enum class X0LawKind { kUniformBox, kFixed };
enum class OverflowPolicy { kError, kTruncate };

struct InputLaw {
  InputLawKind kind = InputLawKind::kUniformBox;
  double scale = 1.0;  // box magnitude or standard deviation
};

struct X0Law {
  X0LawKind kind = X0LawKind::kUniformBox;
  double magnitude = 1.0;
  VectorXd fixed;
};

[[nodiscard]] const char* to_string(InputLawKind k) noexcept;
[[nodiscard]] const char* to_string(X0LawKind k) noexcept;
[[nodiscard]] const char* to_string(OverflowPolicy p) noexcept;

inline constexpr double kStateOverflowLimit = 1e12;

struct RolloutConfig {
  int M = 50;
  double wbar = 0.015;
  InputLaw input_law;
  X0Law x0_law;
  std::uint64_t seed = 0;
  /// kTruncate keeps the longest prefix whose states stay within the limit.
  OverflowPolicy overflow = OverflowPolicy::kError;

  void validate(int nx) const;
};

struct Rollout {
  Trajectory trajectory;
  MatrixXd noise;  // nx x M', the drawn w_k (M' = recorded horizon)
  bool truncated = false;
};

/// x_{k+1} = A x_k + B u_k + w_k for M steps. Throws SamplingError when a
/// state entry exceeds kStateOverflowLimit and the policy is kError.
[[nodiscard]] Rollout simulate_rollout(const SystemSample& theta, const RolloutConfig& cfg, Rng& rng);
[[nodiscard]] Trajectory simulate_trajectory(const SystemSample& theta, const RolloutConfig& cfg, Rng& rng);
/// Uses Rng(cfg.seed).
[[nodiscard]] Trajectory simulate_trajectory(const SystemSample& theta, const RolloutConfig& cfg);

struct GeneratedDataset {
  int nx = 0;
  int nu = 0;
  std::vector<Trajectory> trajectories;
  /// Hidden ground truth for oracles and diagnostics; never serialized with the dataset.
  std::vector<SystemSample> systems;
  std::vector<std::uint64_t> seeds;  // per-trajectory seed_i
};

/// Per-trajectory seed: derive_seed(master_seed, i).
[[nodiscard]] std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t i) noexcept;
/// Substreams of one trajectory seed: the system draw and the attempt-th recording.
[[nodiscard]] std::uint64_t system_stream(std::uint64_t trajectory_seed) noexcept;
[[nodiscard]] std::uint64_t rollout_stream(std::uint64_t trajectory_seed, std::uint64_t attempt) noexcept;

/// Records one trajectory of `theta` from the given rollout substream.
[[nodiscard]] Rollout record_rollout(const SystemSample& theta, const RolloutConfig& cfg, std::uint64_t seed);

[[nodiscard]] GeneratedDataset generate_dataset(const FleetDistribution& dist, int N, const RolloutConfig& cfg,
                                                std::uint64_t master_seed);

}  // namespace scenario_ddc
