#include "ratecert/beta.h"

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

namespace ratecert {
namespace {

const BetaFamily kFamilies[] = {BetaFamily::Exponential(), BetaFamily::RationalFamily(2.0),
                                BetaFamily::FiniteTime(2.0, 0.5)};

std::vector<double> Grid(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

// Scalar trajectory sampled from a closed-form solution.
Trajectory ScalarTrajectory(double (*x)(double), double t_end, int n) {
  Trajectory traj;
  for (double t : Grid(0.0, t_end, n)) {
    traj.times.push_back(t);
    traj.states.push_back(Eigen::VectorXd::Constant(1, x(t)));
    traj.derivatives.push_back(Eigen::VectorXd::Zero(1));
  }
  return traj;
}

TEST(BetaTest, ClosedForms) {
  EXPECT_EQ(Beta(BetaFamily::RationalFamily(2.0), 2.0, 0.5), Beta(BetaFamily::RationalFamily(2.0), 1.0, 0.0));
  EXPECT_EQ(Beta(BetaFamily::RationalFamily(2.0), 2.0, 0.5), 1.0);
  EXPECT_EQ(Beta(BetaFamily::FiniteTime(2.0, 0.5), 3.0, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(Beta(BetaFamily::Exponential(), 3.0, std::log(3.0)), 1.0);
  EXPECT_EQ(Rho(BetaFamily::Exponential(), 2.0), -2.0);
  EXPECT_EQ(Rho(BetaFamily::RationalFamily(2.0), 3.0), -9.0);
  EXPECT_EQ(Rho(BetaFamily::FiniteTime(2.0, 0.5), 0.0), 0.0);
  EXPECT_EQ(Rho(BetaFamily::FiniteTime(2.0, 0.5), 0.3), -1.0);
}

TEST(BetaTest, NormalizedAndMonotone) {
  const auto ys = Grid(0.0, 5.0, 41);
  for (const auto& fam : kFamilies) {
    for (double y : ys) EXPECT_EQ(Beta(fam, y, 0.0), y);
    for (double t : Grid(0.0, 3.0, 13)) {
      for (std::size_t i = 1; i < ys.size(); ++i) EXPECT_LE(Beta(fam, ys[i - 1], t), Beta(fam, ys[i], t));
    }
  }
}

TEST(BetaTest, NegativeTimeExtension) {
  EXPECT_DOUBLE_EQ(BetaNeg(BetaFamily::Exponential(), 1.0, std::log(2.0)), 2.0);
  EXPECT_EQ(BetaNeg(BetaFamily::RationalFamily(2.0), 1.0, 1.0), std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(BetaNeg(BetaFamily::RationalFamily(2.0), Beta(BetaFamily::RationalFamily(2.0), 2.0, 0.5), 0.5),
                   2.0);
  for (const auto& fam : kFamilies) {
    for (double y : Grid(0.05, 5.0, 25)) {
      for (double t : Grid(0.0, 2.0, 21)) {
        const double b = Beta(fam, y, t);
        if (b <= 0.0) continue;
        EXPECT_NEAR(BetaNeg(fam, b, t), y, 1e-12 * (1.0 + y)) << ToString(fam.kind) << " y=" << y << " t=" << t;
      }
    }
  }
}

TEST(BetaTest, FamiliesAreTimeInvariant) {
  const auto ys = Grid(0.1, 5.0, 50);
  const auto ts = Grid(0.0, 3.0, 31);
  for (const auto& fam : kFamilies) {
    const TimeInvarianceReport r = CheckTimeInvariance(fam, ys, ts);
    EXPECT_TRUE(r.passed) << ToString(fam.kind) << ": " << r.message;
  }
}

TEST(BetaTest, ProbeWithoutSemigroupFails) {
  const BetaFunction probe = [](double y, double t) { return y / (1.0 + t); };
  const TimeInvarianceReport r = CheckTimeInvariance(probe, nullptr, {2.0}, {0.0, 1.0});
  ASSERT_FALSE(r.passed);
  ASSERT_TRUE(r.semigroup_violation.has_value());
  // beta(beta(2, 1), 1) = 1/2 but beta(2, 2) = 2/3.
  EXPECT_EQ((*r.semigroup_violation)[0], 2.0);
  EXPECT_EQ((*r.semigroup_violation)[1], 1.0);
  EXPECT_EQ((*r.semigroup_violation)[2], 1.0);
}

TEST(BetaTest, WrongGeneratorIsDetected) {
  const RhoFunction wrong = [](double y) { return -2.0 * y; };
  const BetaFunction exp_beta = [](double y, double t) { return y * std::exp(-t); };
  const TimeInvarianceReport r = CheckTimeInvariance(exp_beta, wrong, {1.0, 2.0}, {0.0, 1.0});
  EXPECT_FALSE(r.passed);
  EXPECT_TRUE(r.rho_violation.has_value());
}

TEST(BetaTest, PointwiseBoundOnClosedFormSolutions) {
  // x' = -x from 1.
  const Trajectory lin = ScalarTrajectory([](double t) { return std::exp(-t); }, 5.0, 201);
  const auto holds = PointwiseBound(BetaFamily::Exponential(), AlphaMeasure::TwoNormPow(1.0), 1.0, 1.0, lin);
  EXPECT_TRUE(holds.holds);
  EXPECT_LE(holds.worst_margin, 1e-12);
  const auto fails = PointwiseBound(BetaFamily::Exponential(), AlphaMeasure::TwoNormPow(1.0), 1.0, 1.5, lin);
  EXPECT_FALSE(fails.holds);
  EXPECT_GT(fails.worst_margin, 0.0);

  // x' = -x^3 from 2: x(t)^2 = 4 / (1 + 8 t).
  const Trajectory cubic = ScalarTrajectory([](double t) { return 2.0 / std::sqrt(1.0 + 8.0 * t); }, 5.0, 201);
  const auto rational =
      PointwiseBound(BetaFamily::RationalFamily(2.0), AlphaMeasure::TwoNormPow(2.0), 1.0, 2.0, cubic);
  EXPECT_TRUE(rational.holds) << rational.worst_margin;
  EXPECT_LE(std::abs(rational.worst_margin), 1e-12);
}

TEST(BetaTest, AlphaMeasures) {
  Eigen::VectorXd x(2);
  x << 3.0, -4.0;
  EXPECT_DOUBLE_EQ(AlphaMeasure::TwoNormPow(1.0)(x), 5.0);
  EXPECT_DOUBLE_EQ(AlphaMeasure::TwoNormPow(2.0)(x), 25.0);
  // (|3|^4 + |4|^4)^(0.5 / 4).
  EXPECT_DOUBLE_EQ(AlphaMeasure::QuasiNormPow(4.0, 0.5)(x), std::pow(81.0 + 256.0, 0.125));
  EXPECT_EQ(AlphaMeasure::QuasiNormPow(4.0, 0.5)(Eigen::VectorXd::Zero(2)), 0.0);
}

}  // namespace
}  // namespace ratecert
