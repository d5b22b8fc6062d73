#include "ratecert/sos.h"

#include <cmath>

#include <gtest/gtest.h>

#include "ratecert/parser.h"

namespace ratecert {
namespace {

Polynomial P(const std::string& text, int nvars) { return ParsePolynomial(text, DefaultVariableNames(nvars)); }

SosSolveOptions Feasibility() {
  SosSolveOptions o;
  o.mode = SosMode::kFeasibility;
  return o;
}

TEST(GramTest, BasisAndCoefficientMap) {
  const GramParameterization g = GramParameterize(4, 2, false);
  EXPECT_EQ(g.basis.size(), 6u);
  // x1^2 x2^2 arises from (x1 x2)^2 and from x1^2 * x2^2.
  const auto& pairs = g.coefficient_map.at(Monomial({2, 2}));
  EXPECT_EQ(pairs.size(), 2u);
  const GramParameterization h = GramParameterize(4, 2, true);
  EXPECT_EQ(h.basis.size(), 3u);
  for (const auto& m : h.basis) EXPECT_EQ(m.degree(), 2);
}

TEST(GramTest, PutinarDegrees) {
  SosConstraint c;
  c.degree = 5;
  c.domain = SemialgebraicSet(2, {P("1 - x1^2 - x2^2", 2), P("x1", 2), P("x1^6", 2)});
  EXPECT_EQ(PutinarAllocate(c), (std::vector<int>{2, 4, -2}));
}

TEST(SosProgramTest, MinimizesShift) {
  // min gamma s.t. x^2 - 2x + gamma is SOS; min over x of x^2 - 2x is -1.
  SosProgram prog(1);
  const int gamma = prog.NewScalar("gamma");
  prog.AddSosConstraint("shift", AffinePolynomial(P("x1^2 - 2*x1", 1)) +
                                     AffinePolynomial::Variable(1, gamma, Polynomial(1, 1.0)),
                        2);
  prog.SetObjective({{gamma, 1.0}});
  const SosResult r = SolveSos(prog);
  ASSERT_EQ(r.status, SosStatus::kFeasible) << r.message;
  EXPECT_NEAR(r.solution.values[0], 1.0, 1e-6);
  EXPECT_LE(r.solution.max_relative_residual, 1e-6);
}

TEST(SosProgramTest, QuarticThreshold) {
  // x^4 + c x^2 + 1 >= 0 on R iff t^2 + c t + 1 >= 0 for t >= 0 iff c >= -2;
  // univariate nonnegative polynomials are SOS.
  for (double c : {-3.0, -2.1, -1.9, 0.0, 5.0}) {
    SosProgram prog(1);
    Polynomial p = P("x1^4 + 1", 1) + c * P("x1^2", 1);
    prog.AddSosConstraint("quartic", p, 4);
    const SosResult r = SolveSos(prog, Feasibility());
    if (c >= -2.0) {
      EXPECT_EQ(r.status, SosStatus::kFeasible) << c << " tau=" << r.tau;
    } else {
      EXPECT_EQ(r.status, SosStatus::kInfeasible) << c << " tau=" << r.tau;
    }
  }
}

TEST(SosProgramTest, MotzkinIsNotSos) {
  SosProgram prog(2);
  prog.AddSosConstraint("motzkin", P("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2), 6);
  const SosResult r = SolveSos(prog, Feasibility());
  EXPECT_NE(r.status, SosStatus::kFeasible) << r.tau;
  EXPECT_GT(r.tau, 1e-7);
}

TEST(SosProgramTest, MotzkinTimesNormIsSos) {
  SosProgram prog(2);
  const Polynomial m = P("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2);
  prog.AddSosConstraint("motzkin_scaled", m * P("x1^2 + x2^2 + 1", 2), 8);
  const SosResult r = SolveSos(prog, Feasibility());
  ASSERT_EQ(r.status, SosStatus::kFeasible) << r.tau << " " << r.message;
  EXPECT_TRUE(SampleSoundness(r.solution.certificates[0], 500, 2.0, 7).passed);
}

TEST(SosProgramTest, LocalCertificateUsesMultiplier) {
  // x + 1 = (x + 1)^2 / 2 + (1 - x^2) / 2 on [-1, 1]; globally it is odd.
  const SemialgebraicSet interval(1, {P("1 - x1^2", 1)});
  SosProgram local(1);
  local.AddSosConstraint("local", P("x1 + 1", 1), interval, 2);
  const SosResult r = SolveSos(local, Feasibility());
  ASSERT_EQ(r.status, SosStatus::kFeasible) << r.message;
  const ConstraintCertificate& cert = r.solution.certificates[0];
  ASSERT_EQ(cert.multipliers.size(), 1u);
  const Polynomial rebuilt = cert.s0.polynomial + cert.multipliers[0].polynomial * P("1 - x1^2", 1);
  EXPECT_LE(rebuilt.DistanceTo(P("x1 + 1", 1)), 1e-6);
  // Beyond the interval the certificate cannot exist: x + 1.5 on [-2, 2]
  // would certify x + 1.5 >= 0 at x = -2.
  SosProgram wide(1);
  wide.AddSosConstraint("wide", P("x1 + 1.5", 1), SemialgebraicSet(1, {P("4 - x1^2", 1)}), 4);
  EXPECT_NE(SolveSos(wide, Feasibility()).status, SosStatus::kFeasible);

  SosProgram global(1);
  global.AddSosConstraint("global", P("x1 + 1", 1), 2);
  EXPECT_EQ(SolveSos(global, Feasibility()).status, SosStatus::kInfeasible);
}

TEST(SosProgramTest, OddDegreeCoefficientsAreEliminated) {
  // V = a x^2 + b x^3 with V - x^2 SOS at degree 3: the cubic coefficient
  // has no Gram term, so b is forced to zero and a >= 1.
  SosProgram prog(1);
  const PolyTemplate v = prog.NewPolynomial("V", {Monomial(std::vector<int>{2}), Monomial(std::vector<int>{3})});
  prog.AddSosConstraint("v", v.AsAffine() - AffinePolynomial(P("x1^2", 1)), 3);
  prog.SetObjective({{v.ids[0], 1.0}});
  const SosResult r = SolveSos(prog);
  ASSERT_EQ(r.status, SosStatus::kFeasible) << r.message;
  EXPECT_NEAR(r.solution.values[static_cast<std::size_t>(v.ids[0])], 1.0, 1e-6);
  EXPECT_NEAR(r.solution.values[static_cast<std::size_t>(v.ids[1])], 0.0, 1e-9);
}

TEST(SosProgramTest, DegreeOverflowIsRejected) {
  SosProgram prog(2);
  EXPECT_THROW(prog.AddSosConstraint("too_high", P("x1^4 + x2^2", 2), 2), DegreeOverflow);
}

TEST(SosProgramTest, ExtractRejectsBadGram) {
  SosProgram prog(1);
  prog.AddSosConstraint("sq", P("x1^2 + 1", 1), 2);
  const CompiledProgram compiled = Compile(prog);
  ASSERT_EQ(compiled.sdp.block_sizes, (std::vector<int>{2}));
  SdpSolution sol;
  sol.status = SdpStatus::kOptimal;
  sol.X = {Eigen::MatrixXd::Identity(2, 2)};
  EXPECT_NO_THROW(Extract(prog, compiled, sol));
  sol.X[0](1, 1) = -1e-3;
  EXPECT_THROW(Extract(prog, compiled, sol), ResidualTooLarge);
  sol.X[0] = Eigen::MatrixXd::Identity(2, 2);
  sol.X[0](0, 0) = 1.01;
  EXPECT_THROW(Extract(prog, compiled, sol), ResidualTooLarge);
}

TEST(SosProgramTest, CertificateJsonRebuildsExpression) {
  SosProgram prog(2);
  const Polynomial p = P("2*x1^2 + 2*x1*x2 + 3*x2^2 + x1^4", 2);
  prog.AddSosConstraint("p", p, 4);
  const SosResult r = SolveSos(prog);
  ASSERT_EQ(r.status, SosStatus::kFeasible);
  const nlohmann::json doc = CertificateToJson(prog, r.solution);
  const auto& s0 = doc["constraints"][0]["s0"];
  Polynomial rebuilt(2);
  const auto& basis = s0["basis"];
  for (std::size_t a = 0; a < basis.size(); ++a) {
    for (std::size_t b = 0; b < basis.size(); ++b) {
      const Monomial ma(basis[a].get<std::vector<int>>());
      const Monomial mb(basis[b].get<std::vector<int>>());
      rebuilt.AddTerm(ma * mb, s0["gram"][a][b].get<double>());
    }
  }
  EXPECT_LE(rebuilt.DistanceTo(p), 1e-6);
}

TEST(SosProgramTest, DeterministicAcrossRuns) {
  SosProgram prog(2);
  prog.AddSosConstraint("m", P("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2) * P("x1^2 + x2^2 + 1", 2), 8);
  const SosResult a = SolveSos(prog, Feasibility());
  const SosResult b = SolveSos(prog, Feasibility());
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_EQ(a.sdp_iterations, b.sdp_iterations);
}

TEST(SosProgramTest, IntervalQuarticThresholdMatchesGridOracle) {
  // x^2 - c x^4 >= 0 on {1 - x^2 >= 0}; the oracle is a dense grid minimum.
  const SemialgebraicSet interval(1, {P("1 - x1^2", 1)});
  for (double c : {0.5, 0.95, 1.05, 1.5}) {
    double grid_min = 0.0;
    for (int i = 0; i <= 20000; ++i) {
      const double x = -1.0 + 2.0 * i / 20000;
      grid_min = std::min(grid_min, x * x - c * x * x * x * x);
    }
    const bool nonnegative = grid_min >= 0.0;
    SosProgram prog(1);
    prog.AddSosConstraint("quartic", P("x1^2", 1) - c * P("x1^4", 1), interval, 4);
    const SosResult r = SolveSos(prog, Feasibility());
    EXPECT_EQ(r.status == SosStatus::kFeasible, nonnegative) << "c=" << c << " tau=" << r.tau;
    EXPECT_EQ(nonnegative, c <= 1.0);
  }
}

TEST(SosProgramTest, FeasibilityIsMonotoneInDegree) {
  const SemialgebraicSet interval(1, {P("1 - x1^2", 1)});
  const Polynomial motzkin_scaled =
      P("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", 2) * P("x1^2 + x2^2 + 1", 2);
  for (int degree : {4, 6, 8}) {
    SosProgram local(1);
    local.AddSosConstraint("quartic", P("x1^2 - 0.9*x1^4", 1), interval, degree);
    EXPECT_EQ(SolveSos(local, Feasibility()).status, SosStatus::kFeasible) << degree;
  }
  for (int degree : {8, 10}) {
    SosProgram global(2);
    global.AddSosConstraint("motzkin_scaled", motzkin_scaled, degree);
    EXPECT_EQ(SolveSos(global, Feasibility()).status, SosStatus::kFeasible) << degree;
  }
}

TEST(SosProgramTest, ExtractedCertificateReproducesExpression) {
  // V = a x1^2 + b x1 x2 + c x2^2 with V - (x1^2 + x2^2) SOS and
  // 4 - V SOS on the unit disk; the identity must hold with the extracted
  // decision values substituted.
  SosProgram prog(2);
  const PolyTemplate v = prog.NewPolynomial("V", MonomialBasis(2, 2, 2));
  const SemialgebraicSet disk(2, {P("1 - x1^2 - x2^2", 2)});
  prog.AddSosConstraint("lower", v.AsAffine() - AffinePolynomial(P("x1^2 + x2^2", 2)), 2);
  prog.AddSosConstraint("upper", AffinePolynomial(P("4", 2)) - v.AsAffine(), disk, 2);
  const SosResult r = SolveSos(prog, Feasibility());
  ASSERT_EQ(r.status, SosStatus::kFeasible) << r.message;
  const Polynomial V = v.Evaluate(r.solution.values);
  for (const ConstraintCertificate& cert : r.solution.certificates) {
    Polynomial rebuilt = cert.s0.polynomial;
    for (std::size_t i = 0; i < cert.multipliers.size(); ++i) {
      const GramCertificate& m = cert.multipliers[i];
      rebuilt += m.polynomial * cert.domain.constraints[static_cast<std::size_t>(m.multiplier_of)];
    }
    EXPECT_LE(rebuilt.DistanceTo(cert.expression), 1e-6 * cert.scale) << cert.name;
    EXPECT_LE(cert.residual, 1e-6 * cert.scale);
    EXPECT_GE(cert.s0.gram.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff(), -1e-9);
  }
  EXPECT_LE(r.solution.certificates[0].expression.DistanceTo(V - P("x1^2 + x2^2", 2)), 1e-12);
  EXPECT_TRUE(SampleSoundness(r.solution.certificates[1], 500, 1.0, 3).passed);
}

}  // namespace
}  // namespace ratecert
