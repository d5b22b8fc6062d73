#include "ratecert/region.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "ratecert/parser.h"

namespace ratecert {
namespace {

using Eigen::VectorXd;

const std::vector<std::string> kNames = DefaultVariableNames(2);

Polynomial P(const std::string& text, int n = 2) { return ParsePolynomial(text, DefaultVariableNames(n)); }

VectorXd Vec(double a, double b) {
  VectorXd x(2);
  x << a, b;
  return x;
}

// Minimum of V over a parametrized curve by a dense scan, restricted to the
// points where `keep` holds.
template <typename Curve, typename Keep>
double ScanMin(const Polynomial& V, Curve curve, Keep keep, double t0, double t1, int n = 200000) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const VectorXd x = curve(t0 + (t1 - t0) * i / n);
    if (keep(x)) best = std::min(best, V.Evaluate(x));
  }
  return best;
}

TEST(MaxSublevelTest, ConcentricBall) {
  for (double R : {0.5, 2.0}) {
    const double c = MaxSublevel(P("x1^2 + x2^2"), SemialgebraicSet::Ball(2, R));
    EXPECT_NEAR(c, 0.999 * R * R, 1e-9 * R * R);
  }
  const double c3 = MaxSublevel(P("x1^2 + x2^2 + x3^2", 3), SemialgebraicSet::Ball(3, 1.5));
  EXPECT_NEAR(c3, 0.999 * 2.25, 1e-9);
}

TEST(MaxSublevelTest, EllipseInUnitBallMatchesAngleScan) {
  const Polynomial V = P("x1^2 + 4*x2^2");
  const double oracle = ScanMin(
      V, [](double a) { return Vec(std::cos(a), std::sin(a)); }, [](const VectorXd&) { return true; }, 0.0,
      2.0 * std::numbers::pi);
  EXPECT_NEAR(oracle, 1.0, 1e-12);
  EXPECT_NEAR(MaxSublevel(V, SemialgebraicSet::Ball(2, 1.0)), 0.999 * oracle, 1e-9);
}

TEST(MaxSublevelTest, TwoConstraintsTakeTheSmallerPiece) {
  const Polynomial V = P("x1^2 + 3*x2^2 + x1*x2 - 0.5*x1");
  const SemialgebraicSet omega(2, {P("1 - x1^2 - x2^2"), P("0.4 - x2")});
  const SemialgebraicSet omega_cut(2, {P("1 - x1^2 - x2^2"), P("0.4 + x1")});
  for (int which = 0; which < 2; ++which) {
    const SemialgebraicSet& dom = which == 0 ? omega : omega_cut;
    auto inside = [&](const VectorXd& x) { return dom.Margin(x) >= -1e-12; };
    const double circle = ScanMin(
        V, [](double a) { return Vec(std::cos(a), std::sin(a)); }, inside, 0.0, 2.0 * std::numbers::pi);
    const double line = which == 0 ? ScanMin(V, [](double t) { return Vec(t, 0.4); }, inside, -1.0, 1.0)
                                   : ScanMin(V, [](double t) { return Vec(-0.4, t); }, inside, -1.0, 1.0);
    const double oracle = std::min(circle, line);
    EXPECT_NEAR(MaxSublevel(V, dom), 0.999 * oracle, 1e-7);
  }
}

TEST(MaxSublevelTest, RequiresABoundingConstraint) {
  EXPECT_THROW(MaxSublevel(P("x1^2 + x2^2"), SemialgebraicSet(2)), UnboundedDomain);
  EXPECT_THROW(MaxSublevel(P("x1^2 + x2^2"), SemialgebraicSet(2, {P("1 - x1")})), UnboundedDomain);
  EXPECT_THROW(MaxSublevel(P("x1^2 + x2^2"), SemialgebraicSet(2, {P("1 - x1^2")})), UnboundedDomain);
  EXPECT_TRUE(HasBoundingConstraint(SemialgebraicSet(2, {P("1 - x1"), P("4 - x1^4 - x2^2")})));
}

TEST(CheckInvarianceTest, ScalarFlows) {
  const Polynomial V = P("x1^2", 1);
  const InvarianceReport in = CheckInvariance(V, 1.0, [](const VectorXd& x) { return VectorXd(-x); }, 10);
  EXPECT_TRUE(in.passed);
  EXPECT_EQ(in.samples, 10);
  const InvarianceReport out = CheckInvariance(V, 1.0, [](const VectorXd& x) { return VectorXd(x); }, 10);
  EXPECT_FALSE(out.passed);
  EXPECT_NEAR(std::abs(out.worst_point[0]), 1.0, 1e-9);
  EXPECT_NEAR(out.worst_ratio, 1.0, 1e-12);
}

TEST(Boundary2dTest, CircleEllipseAndCoarseResolution) {
  const Polyline circle = Boundary2d(P("x1^2 + x2^2"), 1.0, 360);
  ASSERT_EQ(circle.points.size(), 360u);
  EXPECT_FALSE(circle.from_marching_squares);
  for (const auto& p : circle.points) EXPECT_NEAR(p.norm(), 1.0, 1e-6);

  const Polynomial ell = P("x1^2 + 4*x2^2");
  const Polyline e = Boundary2d(ell, 1.0, 720);
  for (std::size_t i = 0; i < e.points.size(); ++i) {
    const double a = e.angles[i];
    // Analytic radius of the ellipse with semi-axes (1, 0.5) along angle a.
    const double rho = 1.0 / std::sqrt(std::cos(a) * std::cos(a) + 4.0 * std::sin(a) * std::sin(a));
    EXPECT_NEAR(e.points[i].norm(), rho, 1e-9);
    EXPECT_LE(ell.Evaluate(VectorXd(e.points[i])), 1.0 + 1e-6);
  }
  EXPECT_EQ(Boundary2d(ell, 1.0, 4).points.size(), 4u);
}

TEST(Boundary2dTest, FallsBackToMarchingSquares) {
  // Level curve that does not surround the origin: circle of radius 1 at (3, 0).
  const Polynomial V = P("(x1 - 3)^2 + x2^2");
  EXPECT_THROW(PolarBoundary(V, 1.0, 64, 5.0), std::runtime_error);
  const Polyline line = Boundary2d(V, 1.0, 64, 5.0);
  EXPECT_TRUE(line.from_marching_squares);
  ASSERT_GT(line.points.size(), 100u);
  for (const auto& p : line.points) {
    EXPECT_NEAR((p - Eigen::Vector2d(3.0, 0.0)).norm(), 1.0, 1e-9);
    EXPECT_LE(V.Evaluate(VectorXd(p)), 1.0 + 1e-6);
  }
  // Consecutive points are grid neighbours, so the loop is ordered.
  for (std::size_t i = 0; i < line.points.size(); ++i) {
    const auto& a = line.points[i];
    const auto& b = line.points[(i + 1) % line.points.size()];
    EXPECT_LT((a - b).norm(), 2.0 * 10.0 / 256);
  }
}

TEST(SublevelSamplingTest, SamplesStayInTheSetAndSoundnessDetectsEscape) {
  const Polynomial V = P("x1^2 + 4*x2^2");
  for (const auto& x : SampleSublevel(V, 0.7, 500, 10.0, 3)) EXPECT_LE(V.Evaluate(x), 0.7 + 1e-9);
  const auto ball = SemialgebraicSet::Ball(2, 1.0);
  const ContainmentReport ok = CheckSublevelInside(V, MaxSublevel(V, ball), ball, 500, 5);
  EXPECT_TRUE(ok.holds);
  EXPECT_EQ(ok.samples, 1000);
  const ContainmentReport bad = CheckSublevelInside(V, 1.2, ball, 500, 5);
  EXPECT_FALSE(bad.holds);
  EXPECT_GT(bad.worst, 0.0);
}

TEST(NestingTest, ConcentricRegions) {
  RegionResult small, large;
  small.V = large.V = P("x1^2 + 4*x2^2");
  small.domain = large.domain = SemialgebraicSet::Ball(2, 1.0);
  small.c_star = 0.3;
  large.c_star = 0.9;
  small.boundary = Boundary2d(small.V, small.c_star, 90);
  large.boundary = Boundary2d(large.V, large.c_star, 90);
  EXPECT_TRUE(CheckNesting(small, large, 500, 1).holds);
  const ContainmentReport reverse = CheckNesting(large, small, 500, 1);
  EXPECT_FALSE(reverse.holds);
  EXPECT_NEAR(reverse.worst, 2.0, 1e-9);
}

AnalysisSpec VanDerPolSpec() {
  AnalysisSpec spec;
  spec.condition = Condition::kExponential;
  spec.field = {ParseExpression("-x2", kNames), ParseExpression("-(1 - x1^2)*x2 + x1", kNames)};
  spec.domain = SemialgebraicSet::Ball(2, 1.0);
  spec.d = 4;
  return spec;
}

DomainOfRadius BallOfRadius() {
  return [](double r) { return SemialgebraicSet::Ball(2, r); };
}

TEST(RegionForRateTest, VanDerPolRegionsAreSoundInvariantAndNested) {
  const AnalysisSpec spec = VanDerPolSpec();
  RadiusSearchOptions search;
  search.r_lo = 0.05;
  search.r_hi = 2.0;
  RegionOptions options;
  options.sublevel.samples_per_constraint = 2000;
  const RateRegion slow = RegionForRate(spec, 0.1, BallOfRadius(), search, options);
  const RateRegion fast = RegionForRate(spec, 0.35, BallOfRadius(), search, options);
  EXPECT_GT(slow.radius, fast.radius);
  for (const RateRegion* r : {&slow, &fast}) {
    EXPECT_GT(r->region.c_star, 0.0);
    ASSERT_TRUE(r->region.invariance_checked);
    EXPECT_TRUE(r->region.invariance.passed) << "k=" << r->k << " ratio " << r->region.invariance.worst_ratio;
    EXPECT_TRUE(CheckSublevelInside(r->region.V, r->region.c_star, r->region.domain, 500, 11).holds);
    for (const auto& p : r->region.boundary.points) {
      EXPECT_LE(r->region.V.Evaluate(VectorXd(p)), r->region.c_star * (1.0 + 1e-6));
      EXPECT_GT(r->region.domain.Margin(VectorXd(p)), 0.0);
    }
  }
  EXPECT_TRUE(CheckNesting(fast.region, slow.region, 500, 2).holds);
}

TEST(RegionForRateTest, InfeasibleRateIsReported) {
  RadiusSearchOptions search;
  search.r_lo = 0.05;
  EXPECT_THROW(RegionForRate(VanDerPolSpec(), 0.7, BallOfRadius(), search), InfeasibleAtKLo);
}

TEST(PolylineCsvTest, HeaderAndRows) {
  const Polyline line = Boundary2d(P("x1^2 + x2^2"), 4.0, 4);
  std::ostringstream out;
  WritePolylineCsv(line, out);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "angle,x1,x2");
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  EXPECT_EQ(rows, 4);
}

}  // namespace
}  // namespace ratecert
