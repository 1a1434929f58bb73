#include <gtest/gtest.h>

#include "scenario_ddc/error.hpp"
#include "scenario_ddc/sdp.hpp"
#include "test_support.hpp"

namespace scenario_ddc::sdp {
namespace {

using testing::lambda_min;

// F0 + sum_i y_i F_i from dense matrices.
LmiConstraint make_lmi(const MatrixXd& f0, const std::vector<MatrixXd>& fi, const std::string& label = "") {
  LmiConstraint c;
  c.dim = static_cast<int>(f0.rows());
  c.constant = svec(f0);
  c.coefficients.resize(svec_length(c.dim), static_cast<Eigen::Index>(fi.size()));
  for (std::size_t i = 0; i < fi.size(); ++i) c.coefficients.col(static_cast<Eigen::Index>(i)) = svec(fi[i]);
  c.label = label;
  return c;
}

TEST(Svec, RoundTripAndInnerProduct) {
  Rng rng(1);
  for (int n = 1; n <= 6; ++n) {
    MatrixXd a = testing::random_matrix(n, n, rng), b = testing::random_matrix(n, n, rng);
    a = (0.5 * (a + a.transpose())).eval();
    b = (0.5 * (b + b.transpose())).eval();
    EXPECT_EQ(svec_length(n), n * (n + 1) / 2);
    EXPECT_TRUE(smat(svec(a), n).isApprox(a, 1e-14));
    EXPECT_NEAR(svec(a).dot(svec(b)), (a * b).trace(), 1e-12);
  }
  EXPECT_THROW((void)smat(VectorXd::Zero(5), 3), ValidationError);
}

TEST(InteriorPoint, FindsPointOfSimpleLmi) {
  // [[y, 1], [1, y]] >= 0  <=>  y >= 1
  SdpProblem p;
  p.num_vars = 1;
  p.constraints.push_back(make_lmi((MatrixXd(2, 2) << 0, 1, 1, 0).finished(), {MatrixXd::Identity(2, 2)}));
  const auto r = InteriorPointBackend().solve(p);
  ASSERT_EQ(r.status, SdpStatus::kFeasible);
  EXPECT_GE(lambda_min(p.constraints[0].evaluate(r.y)), -1e-9);
}

TEST(InteriorPoint, DetectsInfeasibility) {
  // y >= 1 and y <= 0
  SdpProblem p;
  p.num_vars = 1;
  p.constraints.push_back(make_lmi(MatrixXd::Constant(1, 1, -1), {MatrixXd::Constant(1, 1, 1)}));
  p.constraints.push_back(make_lmi(MatrixXd::Zero(1, 1), {MatrixXd::Constant(1, 1, -1)}));
  const auto r = InteriorPointBackend().solve(p);
  EXPECT_EQ(r.status, SdpStatus::kInfeasible);
  EXPECT_LT(r.diagnostics.margin, 0.0);
}

TEST(InteriorPoint, LinearObjectiveReachesBoundary) {
  // maximize -y1 - y2 subject to [[y1, 1], [1, y2]] >= 0: optimum y1 = y2 = 1.
  SdpProblem p;
  p.num_vars = 2;
  MatrixXd e11 = MatrixXd::Zero(2, 2), e22 = MatrixXd::Zero(2, 2);
  e11(0, 0) = 1;
  e22(1, 1) = 1;
  p.constraints.push_back(make_lmi((MatrixXd(2, 2) << 0, 1, 1, 0).finished(), {e11, e22}));
  p.objective.kind = ObjectiveKind::kLinear;
  p.objective.c = -VectorXd::Ones(2);
  const auto r = InteriorPointBackend().solve(p);
  ASSERT_EQ(r.status, SdpStatus::kFeasible);
  EXPECT_NEAR(r.y(0), 1.0, 1e-6);
  EXPECT_NEAR(r.y(1), 1.0, 1e-6);
}

TEST(InteriorPoint, MaxMinMarginCentersInBox) {
  // 0 <= y <= 1 as two 1x1 constraints of unit scale: the largest common margin is at y = 1/2.
  SdpProblem p;
  p.num_vars = 1;
  p.constraints.push_back(make_lmi(MatrixXd::Zero(1, 1), {MatrixXd::Constant(1, 1, 1)}));
  p.constraints.push_back(make_lmi(MatrixXd::Constant(1, 1, 1), {MatrixXd::Constant(1, 1, -1)}));
  p.objective.kind = ObjectiveKind::kMaxMinMargin;
  const auto r = InteriorPointBackend().solve(p);
  ASSERT_EQ(r.status, SdpStatus::kFeasible);
  EXPECT_NEAR(r.y(0), 0.5, 1e-6);
}

TEST(InteriorPoint, MaxMinMarginUsesScaledConstraints) {
  // 0 <= y and 2 - y >= 0; the second constraint has scale 1/2, so y = (2 - y) / 2 at the optimum.
  SdpProblem p;
  p.num_vars = 1;
  p.constraints.push_back(make_lmi(MatrixXd::Zero(1, 1), {MatrixXd::Constant(1, 1, 1)}));
  p.constraints.push_back(make_lmi(MatrixXd::Constant(1, 1, 2), {MatrixXd::Constant(1, 1, -1)}));
  p.objective.kind = ObjectiveKind::kMaxMinMargin;
  const auto r = InteriorPointBackend().solve(p);
  ASSERT_EQ(r.status, SdpStatus::kFeasible);
  EXPECT_NEAR(r.y(0), 2.0 / 3.0, 1e-6);
}

TEST(InteriorPoint, FeasiblePointsHonorTheContract) {
  Rng rng(5);
  const InteriorPointBackend backend;
  for (int trial = 0; trial < 20; ++trial) {
    // A(y) = A0 + sum y_i A_i with A0 built around a known interior point.
    const int n = 2 + trial % 4, m = 1 + trial % 3;
    std::vector<MatrixXd> fi;
    for (int i = 0; i < m; ++i) {
      MatrixXd g = testing::random_matrix(n, n, rng);
      fi.push_back(0.5 * (g + g.transpose()));
    }
    const VectorXd y0 = VectorXd::Random(m);
    MatrixXd f0 = testing::random_spd(n, rng);
    for (int i = 0; i < m; ++i) f0 -= y0(i) * fi[i];
    SdpProblem p;
    p.num_vars = m;
    p.constraints.push_back(make_lmi(f0, fi));
    const auto r = backend.solve(p);
    ASSERT_EQ(r.status, SdpStatus::kFeasible) << "trial " << trial;
    const MatrixXd f = p.constraints[0].evaluate(r.y);
    EXPECT_GE(lambda_min(f), -backend.feasibility_tol() * (1 + f.norm()));
  }
}

TEST(SdpProblem, ValidateRejectsInconsistentSizes) {
  SdpProblem p;
  p.num_vars = 2;
  p.constraints.push_back(make_lmi(MatrixXd::Identity(2, 2), {MatrixXd::Identity(2, 2)}));
  EXPECT_THROW(p.validate(), ValidationError);
  EXPECT_THROW((void)make_backend("no-such-solver"), ValidationError);
}

}  // namespace
}  // namespace scenario_ddc::sdp
