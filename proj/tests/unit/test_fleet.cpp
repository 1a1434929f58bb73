#include <chrono>

#include <gtest/gtest.h>

#include "scenario_ddc/data_model.hpp"
#include "scenario_ddc/error.hpp"
#include "scenario_ddc/fleet.hpp"
#include "test_support.hpp"

namespace scenario_ddc {
namespace {

TEST(BenchmarkFleet, MeanAndCovariance) {
  const auto f = default_benchmark_fleet(0.02);
  EXPECT_EQ(f.nx(), 3);
  EXPECT_EQ(f.nu(), 3);
  EXPECT_EQ(f.dim(), 18);
  const auto mean = unvec_system(f.mu(), 3, 3);
  EXPECT_EQ(mean.A(0, 0), 1.01);
  const MatrixXd a_bar =
      (MatrixXd(3, 3) << 1.01, 0.01, 0, 0.01, 1.01, 0.01, 0, 0.01, 1.01).finished();
  EXPECT_EQ(mean.A, a_bar);
  EXPECT_EQ(mean.B, MatrixXd::Identity(3, 3));
  EXPECT_EQ(benchmark_A(), a_bar);
  for (int i = 0; i < 18; ++i)
    for (int j = 0; j < 18; ++j) EXPECT_DOUBLE_EQ(f.sigma()(i, j), i == j ? 0.02 : 0.01);
  EXPECT_DOUBLE_EQ(f.mass(), 0.95);
  EXPECT_THROW((void)default_benchmark_fleet(0.0), ValidationError);
}

TEST(BenchmarkFleet, VecIsColumnMajor) {
  MatrixXd a(2, 2), b(2, 1);
  a << 1, 2, 3, 4;
  b << 5, 6;
  const VectorXd v = vec_system(a, b);
  EXPECT_EQ(v, (VectorXd(6) << 1, 3, 2, 4, 5, 6).finished());
  const auto s = unvec_system(v, 2, 1);
  EXPECT_EQ(s.A, a);
  EXPECT_EQ(s.B, b);
}

TEST(SampleSystem, DegenerateVarianceReturnsMean) {
  const auto f = default_benchmark_fleet(1e-28);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto s = sample_system(f, rng);
    EXPECT_LT((s.A - benchmark_A()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s.B - benchmark_B()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SampleSystem, AcceptanceRateMatchesMass) {
  const auto f = default_benchmark_fleet(0.1);
  Rng rng(2);
  const int n = 100000;
  int accepted = 0;
  VectorXd theta;
  double m2 = 0;
  for (int i = 0; i < n; ++i) {
    f.raw_draw(rng, theta, m2);
    accepted += f.in_support(theta);
  }
  const double rate = static_cast<double>(accepted) / n;
  EXPECT_NEAR(rate, 0.95, 3.5 * std::sqrt(0.95 * 0.05 / n));
}

TEST(SampleSystem, EmpiricalMeanWithinThreeStandardErrors) {
  const auto f = default_benchmark_fleet(0.05);
  Rng rng(3);
  const int n = 100000;
  VectorXd sum = VectorXd::Zero(18), sq = VectorXd::Zero(18);
  for (int i = 0; i < n; ++i) {
    const auto s = sample_system(f, rng);
    const VectorXd v = vec_system(s.A, s.B);
    ASSERT_TRUE(f.in_support(v));
    ASSERT_LE(f.mahalanobis2(v), f.level());
    sum += v;
    sq += v.cwiseProduct(v);
  }
  const VectorXd mean = sum / n;
  const VectorXd var = sq / n - mean.cwiseProduct(mean);
  for (int i = 0; i < 18; ++i) EXPECT_LE(std::abs(mean(i) - f.mu()(i)), 3.0 * std::sqrt(var(i) / n)) << i;
}

TEST(SampleSystem, SingularCovarianceStaysInRange) {
  // Sigma = J for a scalar system: theta - mu is always a multiple of (1, 1).
  const FleetDistribution f(1, 1, VectorXd::Zero(2), MatrixXd::Ones(2, 2));
  EXPECT_EQ(f.rank(), 1);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto s = sample_system(f, rng);
    EXPECT_NEAR(s.A(0, 0), s.B(0, 0), 1e-12);
    EXPECT_TRUE(f.in_support(vec_system(s.A, s.B)));
  }
  VectorXd off(2);
  off << 1.0, -1.0;
  EXPECT_FALSE(f.in_support(off));
}

TEST(SampleSystem, BoxTruncationRespectsHalfWidths) {
  const auto f = default_benchmark_fleet(0.1, TruncationKind::kBox);
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto s = sample_system(f, rng);
    const VectorXd d = vec_system(s.A, s.B) - f.mu();
    EXPECT_TRUE((d.cwiseAbs().array() <= f.half_widths().array()).all());
  }
}

TEST(SampleSystem, RejectionCapRaises) {
  const FleetDistribution f(3, 3, VectorXd::Zero(18), MatrixXd::Identity(18, 18), TruncationKind::kEllipsoid, 1e-15);
  Rng rng(6);
  EXPECT_THROW((void)sample_system(f, rng), SamplingError);
}

TEST(SampleNoise, WithinBallAndMeanEnergy) {
  Rng rng(7);
  EXPECT_TRUE(sample_noise(0.0, 3, rng).isZero(0.0));
  for (int i = 0; i < 1000000; ++i) ASSERT_LE(sample_noise(0.02, 1 + i % 3, rng).squaredNorm(), 0.02);
  const int n = 200000;
  double e = 0;
  for (int i = 0; i < n; ++i) e += sample_noise(0.03, 1, rng).squaredNorm();
  EXPECT_NEAR(e / n, 0.01, 0.01 * 0.01);
}

TEST(Simulate, DeterministicRecursions) {
  RolloutConfig rc;
  rc.M = 6;
  rc.wbar = 0.0;
  rc.x0_law.kind = X0LawKind::kFixed;
  rc.x0_law.fixed = VectorXd::Zero(1);
  Rng rng(8);
  const auto t = simulate_trajectory(testing::scalar_system(1, 1), rc, rng);
  double x = 0;
  for (int k = 0; k <= rc.M; ++k) {
    EXPECT_DOUBLE_EQ(t.states(0, k), x);
    x += t.inputs(0, k);
  }
  rc.x0_law.fixed = VectorXd::Constant(1, 3.0);
  const auto z = simulate_trajectory(testing::scalar_system(0, 0), rc, rng);
  EXPECT_EQ(z.states(0, 0), 3.0);
  EXPECT_TRUE(z.states.rightCols(rc.M).isZero(0.0));
}

TEST(Simulate, ResidualsReproduceDrawnNoise) {
  Rng rng(9);
  const auto sys = testing::random_stable_system(3, 2, rng);
  RolloutConfig rc;
  rc.M = 40;
  rc.wbar = 0.02;
  const auto ro = simulate_rollout(sys, rc, rng);
  const auto dm = build_data_matrices(ro.trajectory);
  EXPECT_LT((dm.Xplus - sys.A * dm.X - sys.B * dm.U - ro.noise).cwiseAbs().maxCoeff(), 1e-12);
  for (int k = 0; k < rc.M; ++k) EXPECT_LE(ro.noise.col(k).squaredNorm(), rc.wbar);
}

TEST(Simulate, OverflowPolicies) {
  RolloutConfig rc;
  rc.M = 200;
  rc.wbar = 0.01;
  const auto sys = testing::scalar_system(3.0, 1.0);
  Rng r1(10);
  EXPECT_THROW((void)simulate_rollout(sys, rc, r1), SamplingError);
  rc.overflow = OverflowPolicy::kTruncate;
  Rng r2(10);
  const auto ro = simulate_rollout(sys, rc, r2);
  EXPECT_TRUE(ro.truncated);
  EXPECT_LT(ro.trajectory.horizon(), rc.M);
  EXPECT_GE(ro.trajectory.horizon(), 1);
  EXPECT_LE(ro.trajectory.states.cwiseAbs().maxCoeff(), kStateOverflowLimit);
  const auto dm = build_data_matrices(ro.trajectory);
  EXPECT_TRUE(membership_consistent_set(sys.A, sys.B, dm, noise_model_from_bound(rc.wbar, dm.horizon(), 1)));
}

TEST(Simulate, RejectsInvalidConfig) {
  Rng rng(11);
  RolloutConfig rc;
  rc.M = 0;
  EXPECT_THROW((void)simulate_rollout(testing::scalar_system(0.5, 1), rc, rng), ValidationError);
  rc.M = 5;
  rc.wbar = -1;
  EXPECT_THROW((void)simulate_rollout(testing::scalar_system(0.5, 1), rc, rng), ValidationError);
  rc.wbar = 0.1;
  rc.input_law.scale = 0;
  EXPECT_THROW((void)simulate_rollout(testing::scalar_system(0.5, 1), rc, rng), ValidationError);
}

TEST(GenerateDataset, DeterministicAndBounded) {
  const auto f = default_benchmark_fleet(0.01);
  RolloutConfig rc;
  rc.M = 60;
  rc.wbar = 0.015;
  const auto g1 = generate_dataset(f, 12, rc, 77), g2 = generate_dataset(f, 12, rc, 77);
  ASSERT_EQ(g1.trajectories.size(), 12u);
  for (int i = 0; i < 12; ++i) {
    EXPECT_EQ(g1.trajectories[i].states, g2.trajectories[i].states);
    EXPECT_EQ(g1.trajectories[i].inputs, g2.trajectories[i].inputs);
    EXPECT_EQ(g1.seeds[i], trajectory_seed(77, static_cast<std::uint64_t>(i)));
    EXPECT_EQ(g1.trajectories[i].seed, g1.seeds[i]);
    const auto dm = build_data_matrices(g1.trajectories[i]);
    const auto& sys = g1.systems[i];
    const MatrixXd w = dm.Xplus - sys.A * dm.X - sys.B * dm.U;
    EXPECT_LE(w.squaredNorm(), rc.M * rc.wbar * (1 + 1e-12));
    EXPECT_TRUE(membership_consistent_set(sys.A, sys.B, dm, noise_model_from_bound(rc.wbar, rc.M, 3)));
  }
  const auto g3 = generate_dataset(f, 12, rc, 78);
  EXPECT_NE(g1.trajectories[0].states, g3.trajectories[0].states);
}

TEST(GenerateDataset, BenchmarkScaleIsFast) {
  const auto f = default_benchmark_fleet(0.01);
  RolloutConfig rc;
  rc.M = 500;
  rc.overflow = OverflowPolicy::kTruncate;
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = generate_dataset(f, 984, rc, 1);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(g.trajectories.size(), 984u);
  EXPECT_LT(s, 10.0);
}

}  // namespace
}  // namespace scenario_ddc
