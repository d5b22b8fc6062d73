#include "ratecert/stability.h"

#include <cmath>

#include <gtest/gtest.h>

#include "ratecert/parser.h"

namespace ratecert {
namespace {

std::vector<SignedPowerExpr> Field(const std::vector<std::string>& comps) {
  const auto names = DefaultVariableNames(static_cast<int>(comps.size()));
  std::vector<SignedPowerExpr> f;
  for (const auto& c : comps) f.push_back(ParseExpression(c, names));
  return f;
}

AnalysisSpec Spec(Condition c, const std::vector<std::string>& field, int d = 1) {
  AnalysisSpec s;
  s.condition = c;
  s.field = Field(field);
  s.domain = SemialgebraicSet(static_cast<int>(field.size()));
  s.d = d;
  s.r = 2 * d;
  return s;
}

TEST(StabilityTest, LinearDecayRateAndGain) {
  // x' = -x: |x(t)| = e^{-t} |x0| exactly.
  const AnalysisSpec spec = Spec(Condition::kExponential, {"-x1"});
  const RateResult rate = BisectRate(spec);
  EXPECT_GE(rate.k_star, 0.999);
  EXPECT_LE(rate.k_star, 1.0 + 1e-9);
  EXPECT_GT(rate.k_infeasible, 1.0 - 1e-9);
  const GainResult gain = MinimizeGain(spec, rate.k_star);
  EXPECT_NEAR(gain.gain, 1.0, 1e-4);
}

TEST(StabilityTest, UnstableSystemIsInfeasibleAtZero) {
  const AnalysisSpec spec = Spec(Condition::kExponential, {"x1"});
  EXPECT_THROW(BisectRate(spec), InfeasibleAtKLo);
}

TEST(StabilityTest, SpectralAbscissaOfDiagonalizableLinearSystem) {
  // Eigenvalues -1 and -2; quadratic V achieves every rate below 1 and, A
  // being diagonalizable, rate 1 itself.
  const AnalysisSpec spec = Spec(Condition::kExponential, {"-x1 + 3*x2", "-2*x2"});
  const RateResult rate = BisectRate(spec);
  EXPECT_NEAR(rate.k_star, 1.0, 2e-3);
  // A rate above the spectral abscissa contradicts the linearization.
  const SolveOutcome above = SolveAtRate(spec, 1.05);
  EXPECT_NE(above.status, SosStatus::kFeasible);
}

TEST(StabilityTest, CubicDecayRationalRate) {
  // x' = -x^3 with V = x^2: V' = -2 x^4 = -2 V |x|^2, so k = c p / r = 2.
  AnalysisSpec spec = Spec(Condition::kRationalII, {"-x1^3"});
  spec.p = 2;
  const RateResult rate = BisectRate(spec);
  EXPECT_GE(rate.k_star, 2.0 * (1.0 - 2e-3));
  EXPECT_LE(rate.k_star, 2.0 + 1e-9);
  EXPECT_NEAR(MinimizeGain(spec, rate.k_star).gain, 1.0, 1e-4);

  // The fixed-gain condition with M = 1 gives the same rate here.
  AnalysisSpec fixed = spec;
  fixed.condition = Condition::kRationalI;
  fixed.fixed_gain = 1.0;
  EXPECT_NEAR(BisectRate(fixed).k_star, 2.0, 4e-3);
}

TEST(StabilityTest, RationalExponentsMustBeEven) {
  AnalysisSpec spec = Spec(Condition::kRationalII, {"-x1^3"});
  spec.p = 1;
  EXPECT_THROW(BuildProgram(spec, 1.0), UnsupportedExponent);
  spec.p = 2;
  spec.r = 3;
  EXPECT_THROW(BuildProgram(spec, 1.0), UnsupportedExponent);
}

TEST(StabilityTest, LocalRateMatchesClosedFormAndIgnoresScaling) {
  // x' = -x + x^3 on |x| <= R: with V = c x^{2d}, the decrease condition
  // reads 2d c x^{2d} (1 - k - x^2) >= 0, so k* = 1 - R^2.
  for (double R : {0.5, 0.1}) {
    for (int d : {1, 2}) {
      AnalysisSpec spec = Spec(Condition::kExponential, {"-x1 + x1^3"}, d);
      spec.domain = SemialgebraicSet::Ball(1, R);
      const RateResult scaled = BisectRate(spec);
      EXPECT_NEAR(scaled.k_star, 1.0 - R * R, 2e-3) << "R=" << R << " d=" << d;
      EXPECT_NEAR(scaled.certificate.state_scale, R, 1e-12);
      spec.state_scale = 1.0;
      const RateResult raw = BisectRate(spec);
      EXPECT_NEAR(raw.k_star, scaled.k_star, 2e-3 * scaled.k_star) << "R=" << R << " d=" << d;
    }
  }
}

TEST(StabilityTest, RationalScalingMapsRate) {
  // x' = -x^3 on |x| <= 0.5 has the same rate as globally: V' = -2 V x^2.
  AnalysisSpec spec = Spec(Condition::kRationalII, {"-x1^3"});
  spec.domain = SemialgebraicSet::Ball(1, 0.5);
  const RateResult rate = BisectRate(spec);
  EXPECT_NEAR(rate.k_star, 2.0, 4e-3);
  EXPECT_NEAR(rate.certificate.V.coefficient(Monomial(std::vector<int>{2})),
              rate.certificate.working_V.coefficient(Monomial(std::vector<int>{2})), 1e-12);
}

TEST(StabilityTest, ScalarFiniteTimeExample) {
  // x' = -(1/eta) sign(x)|x|^{1-eta} with eta = 1/2 settles at T = |x0|^eta;
  // in z with x = sign(z) z^2 and h = |z| the conditions hold with k = 1, M = 1.
  AnalysisSpec spec = Spec(Condition::kFiniteTime, {"-2*sign(x1)*abs(x1)^(1/2)"}, 2);
  spec.r = 2;
  spec.eta = Rational(1, 2);
  spec.h_exponents = {1};
  const WorkingSystem w = PrepareSystem(spec);
  EXPECT_EQ(w.field.components[0], ParsePolynomial("-x1", {"x1"}));
  EXPECT_EQ(w.rate_term, ParsePolynomial("x1^4", {"x1"}));
  const RateResult rate = BisectRate(spec);
  EXPECT_GE(rate.k_star, 0.998);
  EXPECT_LE(rate.k_star, 1.0 + 1e-9);
  const GainResult gain = MinimizeGain(spec, rate.k_star);
  EXPECT_NEAR(gain.gain, 1.0, 1e-3);
  // V(x) = |x|^{2r / r} = x^2 in the original state, up to normalization.
  Eigen::VectorXd x(1);
  x << 0.3;
  EXPECT_NEAR(gain.certificate.EvaluateV(x) / gain.certificate.EvaluateV(Eigen::VectorXd::Ones(1)), 0.09, 1e-3);
}

TEST(StabilityTest, FiniteTimeDomainMustTransform) {
  AnalysisSpec spec = Spec(Condition::kFiniteTime, {"-2*sign(x1)*abs(x1)^(1/2)"}, 2);
  spec.r = 2;
  spec.h_exponents = {1};
  spec.domain = SemialgebraicSet(1, {ParsePolynomial("1 - x1", {"x1"})});
  // 1 - sign(z) z^2 is not polynomial.
  EXPECT_THROW(PrepareSystem(spec), std::invalid_argument);
}

TEST(StabilityTest, CertificatesAreSound) {
  AnalysisSpec spec = Spec(Condition::kExponential, {"-x1 + x2", "-x1 - x2 - x1^3"}, 2);
  spec.domain = SemialgebraicSet::Ball(2, 2.0);
  const RateResult rate = BisectRate(spec);
  const SoundnessCheck check = CheckCertificate(rate.certificate, 1000, 42);
  EXPECT_TRUE(check.passed) << check.worst[0] << " " << check.worst[1] << " " << check.worst[2];
  EXPECT_EQ(check.samples, 1000);
  BuiltProgram built = BuildProgram(spec, rate.certificate.k);
  const nlohmann::json doc = rate.certificate.ToJson(built);
  EXPECT_EQ(doc["condition"], "exponential");
  EXPECT_EQ(doc["sos"]["constraints"].size(), 3u);
}

TEST(MapConditionsTest, ExampleAndCompositions) {
  RationalParams in;
  in.C1 = 1;
  in.C2 = 2;
  in.C3 = 3;
  in.r = 2;
  in.q = 4;
  const RationalParams ii = MapConditions(1, in);
  EXPECT_EQ(ii.p, 2.0);
  EXPECT_EQ(ii.gamma, 2.0);
  EXPECT_EQ(ii.c, 1.5);

  // Case 5 is case 1 followed by case 3.
  const RationalParams direct = MapConditions(5, in);
  const RationalParams composed = MapConditions(3, ii);
  EXPECT_DOUBLE_EQ(direct.M, composed.M);
  EXPECT_DOUBLE_EQ(direct.k, composed.k);

  // x' = -x^3 with V = 2 x^2: C1 = C2 = 2, r = 2, V' = -4 x^4 so C3 = 4, q = 4.
  // Then V / C2 = x^2 decreases as -2 (V / C2) x^2: gamma = 1, c = 2, p = 2.
  RationalParams cubic;
  cubic.C1 = 2;
  cubic.C2 = 2;
  cubic.C3 = 4;
  cubic.r = 2;
  cubic.q = 4;
  const RationalParams cubic_ii = MapConditions(1, cubic);
  EXPECT_EQ(cubic_ii.gamma, 1.0);
  EXPECT_EQ(cubic_ii.c, 2.0);
  EXPECT_EQ(cubic_ii.p, 2.0);
  // Back to the linear conditions for x^2: x^2 <= V <= x^2, V' = -2 x^4.
  const RationalParams cubic_i = MapConditions(2, cubic_ii);
  EXPECT_EQ(cubic_i.C1, 1.0);
  EXPECT_EQ(cubic_i.C2, 1.0);
  EXPECT_EQ(cubic_i.C3, 2.0);
  EXPECT_EQ(cubic_i.q, 4.0);
  // And the decay rate of x^2 itself: (x^2)' = -2 (x^2)^2, so k = 2 with M = 1.
  EXPECT_EQ(MapConditions(3, cubic_ii).k, 2.0);
  EXPECT_EQ(MapConditions(3, cubic_ii).M, 1.0);

  // Case 6 is case 4 followed by case 2; case 4 then 3 divides k by M.
  RationalParams iii;
  iii.M = 1.5;
  iii.k = 0.6;
  iii.p = 2;
  const RationalParams via = MapConditions(2, MapConditions(4, iii));
  const RationalParams six = MapConditions(6, iii);
  EXPECT_DOUBLE_EQ(six.C1, via.C1);
  EXPECT_DOUBLE_EQ(six.C3, via.C3);
  EXPECT_EQ(six.q, via.q);
  const RationalParams round = MapConditions(3, MapConditions(4, iii));
  EXPECT_DOUBLE_EQ(round.M, iii.M);
  EXPECT_DOUBLE_EQ(round.k, iii.k / iii.M);
  EXPECT_THROW(MapConditions(7, in), std::invalid_argument);
}

}  // namespace
}  // namespace ratecert
