#include "ratecert/polynomial.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ratecert/parser.h"
#include "ratecert/signed_power.h"

namespace ratecert {
namespace {

using Eigen::VectorXd;

Polynomial P(const std::string& text, int n) { return ParsePolynomial(text, DefaultVariableNames(n)); }

Polynomial RandomPolynomial(std::mt19937_64& rng, int n, int max_degree) {
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::bernoulli_distribution keep(0.5);
  Polynomial p(n);
  for (const Monomial& m : MonomialBasis(n, 0, max_degree)) {
    if (keep(rng)) p.AddTerm(m, coeff(rng));
  }
  return p;
}

VectorXd RandomPoint(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = u(rng);
  return x;
}

// Product rule through binomial coefficients, independent of Monomial code.
double Binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

TEST(PolynomialTest, AddCancelsAndCollects) {
  EXPECT_EQ(P("x1^2 + 1", 2) + P("-x1^2", 2), Polynomial(2, 1.0));
  const Polynomial p = P("3*x1*x2 - x2^3", 2);
  EXPECT_EQ(p + Polynomial(2), p);
  const Polynomial sum = P("2*x1*x2", 2) + P("3*x1*x2 + x2", 2);
  EXPECT_DOUBLE_EQ(sum.coefficient(Monomial({1, 1})), 5.0);
  EXPECT_DOUBLE_EQ(sum.coefficient(Monomial({0, 1})), 1.0);
  EXPECT_EQ(sum.size(), 2u);
}

TEST(PolynomialTest, MultiplyBasics) {
  EXPECT_EQ(P("x1 + x2", 2) * P("x1 - x2", 2), P("x1^2 - x2^2", 2));
  const Polynomial p = P("x1^3 - 2*x2 + 0.5", 2);
  EXPECT_EQ(p * Polynomial(2, 1.0), p);
  EXPECT_EQ(P("x1^2", 1) * P("x1^3", 1), P("x1^5", 1));
}

TEST(PolynomialTest, DimensionMismatchThrows) {
  EXPECT_THROW(P("x1", 1) + P("x1", 2), DimensionMismatch);
  EXPECT_THROW(P("x1", 1) * P("x1", 2), DimensionMismatch);
}

TEST(PolynomialTest, MultiplicationIsEvaluationHomomorphism) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const Polynomial p = RandomPolynomial(rng, n, 4);
    const Polynomial q = RandomPolynomial(rng, n, 4);
    const Polynomial pq = p * q;
    for (int k = 0; k < 100; ++k) {
      const VectorXd x = RandomPoint(rng, n, -2.0, 2.0);
      const double expect = p.Evaluate(x) * q.Evaluate(x);
      EXPECT_NEAR(pq.Evaluate(x), expect, 1e-10 * (1.0 + std::abs(expect)));
    }
  }
}

TEST(PolynomialTest, RingLawsByEvaluation) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const Polynomial p = RandomPolynomial(rng, n, 4);
    const Polynomial q = RandomPolynomial(rng, n, 4);
    const Polynomial s = RandomPolynomial(rng, n, 4);
    const Polynomial lhs = p * (q + s);
    const Polynomial rhs = p * q + p * s;
    for (int k = 0; k < 100; ++k) {
      const VectorXd x = RandomPoint(rng, n, -2.0, 2.0);
      const double scale = 1.0 + std::abs(p.Evaluate(x)) * (std::abs(q.Evaluate(x)) + std::abs(s.Evaluate(x)));
      EXPECT_NEAR(lhs.Evaluate(x), rhs.Evaluate(x), 1e-9 * scale);
    }
  }
}

TEST(PolynomialTest, GradientExamples) {
  const auto g = P("x1^2 + x2^2", 2).Gradient();
  EXPECT_EQ(g[0], P("2*x1", 2));
  EXPECT_EQ(g[1], P("2*x2", 2));
  for (const auto& c : Polynomial(3, 4.0).Gradient()) EXPECT_TRUE(c.is_zero());
}

TEST(PolynomialTest, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  const Polynomial v = Polynomial::SquaredNormPower(2, 2);
  const auto grad = v.Gradient();
  const double h = 1e-5;
  for (int k = 0; k < 20; ++k) {
    const VectorXd x = RandomPoint(rng, 2, -2.0, 2.0);
    // Closed form 4 x_i (x1^2 + x2^2).
    for (int i = 0; i < 2; ++i) {
      const double closed = 4.0 * x(i) * x.squaredNorm();
      VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const double fd = (v.Evaluate(xp) - v.Evaluate(xm)) / (2 * h);
      EXPECT_NEAR(grad[i].Evaluate(x), closed, 1e-12 * (1.0 + std::abs(closed)));
      EXPECT_NEAR(fd, closed, 1e-6 * (1.0 + std::abs(closed)));
    }
  }
  for (int trial = 0; trial < 5; ++trial) {
    const Polynomial p = RandomPolynomial(rng, 3, 4);
    const auto gp = p.Gradient();
    for (int k = 0; k < 20; ++k) {
      const VectorXd x = RandomPoint(rng, 3, -2.0, 2.0);
      for (int i = 0; i < 3; ++i) {
        VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        const double fd = (p.Evaluate(xp) - p.Evaluate(xm)) / (2 * h);
        EXPECT_NEAR(gp[i].Evaluate(x), fd, 1e-6 * (1.0 + std::abs(fd)));
      }
    }
  }
}

TEST(PolynomialTest, LieDerivativeExamples) {
  EXPECT_EQ(LieDerivative(P("x1^2", 1), PolyVectorField({P("-x1", 1)})), P("-2*x1^2", 1));
  EXPECT_EQ(LieDerivative(P("x1^2", 1), PolyVectorField({P("-x1^3", 1)})), P("-2*x1^4", 1));
  const PolyVectorField lorenz({P("8*(x2 - x1)", 3), P("x1*(0.5 - x3) - x2", 3), P("x1*x2 - 4*x3", 3)});
  const Polynomial vdot = LieDerivative(P("x1^2 + x2^2 + x3^2", 3), lorenz);
  // 2x1*8(x2-x1) + 2x2*(0.5x1 - x1x3 - x2) + 2x3*(x1x2 - 4x3), expanded by hand.
  EXPECT_EQ(vdot, P("-16*x1^2 + 17*x1*x2 - 2*x2^2 - 8*x3^2", 3));
  EXPECT_DOUBLE_EQ(vdot.coefficient(Monomial({2, 0, 0})), -16.0);
}

TEST(PolynomialTest, MonomialBasisCountsAndOrder) {
  const auto b = MonomialBasis(2, 0, 1);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0], Monomial({0, 0}));
  EXPECT_EQ(b[1], Monomial({1, 0}));
  EXPECT_EQ(b[2], Monomial({0, 1}));
  EXPECT_EQ(MonomialBasis(3, 0, 2).size(), 10u);
  const auto h = MonomialBasis(2, 2, 2);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(h[0], Monomial({2, 0}));
  EXPECT_EQ(h[1], Monomial({1, 1}));
  EXPECT_EQ(h[2], Monomial({0, 2}));
  for (int n = 1; n <= 4; ++n) {
    for (int hi = 0; hi <= 12; ++hi) {
      for (int lo = 0; lo <= hi; ++lo) {
        const double expect = Binomial(n + hi, n) - (lo > 0 ? Binomial(n + lo - 1, n) : 0.0);
        const auto basis = MonomialBasis(n, lo, hi);
        ASSERT_EQ(static_cast<double>(basis.size()), expect) << n << " " << lo << " " << hi;
        EXPECT_EQ(MonomialBasisSize(n, lo, hi), basis.size());
        for (std::size_t i = 1; i < basis.size(); ++i) ASSERT_TRUE(basis[i - 1] < basis[i]);
      }
    }
  }
}

TEST(ParserTest, ExampleVectorFields) {
  EXPECT_EQ(P("-x2", 2), Polynomial(Monomial({0, 1}), -1.0));
  // vdP second component, expanded: -x2 + x1^2 x2 + x1.
  Polynomial vdp(2);
  vdp.AddTerm(Monomial({0, 1}), -1.0);
  vdp.AddTerm(Monomial({2, 1}), 1.0);
  vdp.AddTerm(Monomial({1, 0}), 1.0);
  EXPECT_EQ(P("-(1-x1^2)*x2+x1", 2), vdp);
  Polynomial lz(3);
  lz.AddTerm(Monomial({1, 1, 0}), 1.0);
  lz.AddTerm(Monomial({0, 0, 1}), -4.0);
  EXPECT_EQ(P("x1*x2-4*x3", 3), lz);
}

TEST(ParserTest, RoundTripIsIdentity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const Polynomial p = RandomPolynomial(rng, n, 5) * 1.2345678901234567;
    const Polynomial back = P(p.ToString(), n);
    EXPECT_EQ(back.terms(), p.terms()) << p.ToString();
  }
  const Polynomial tiny = P("1e-3*x1 - 3.5e+20*x2^4 + 0.1", 2);
  EXPECT_EQ(P(tiny.ToString(), 2).terms(), tiny.terms());
}

TEST(ParserTest, ErrorsCarryOffsets) {
  try {
    P("x1 + * x2", 2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 5u);
  }
  try {
    P("x1 + y", 2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 5u);
    EXPECT_NE(e.message().find("unknown identifier"), std::string::npos);
  }
  try {
    P("x1^(1/3)", 1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
  }
  EXPECT_THROW(P("x1^-2", 1), ParseError);
  EXPECT_THROW(P("(x1 + 1", 1), ParseError);
  EXPECT_THROW(P("abs(x1)^(1/2)", 1), ParseError);
}

TEST(ParserTest, SystemFileWithSignedPowers) {
  const std::string text =
      "# finite-time van der Pol\n"
      "f1 = -sign(x2)*abs(x2)^(1/3);\n"
      "f2 = 2*(abs(x1)^(2/3) - 1)*sign(x2)*abs(x2)^1/3 + sign(x1)*abs(x1)^(1/3);\n"
      "g1 = 1 - x1^2 - x2^2;  # unit ball\n";
  const ParsedSystem sys = ParseSystem(text);
  EXPECT_EQ(sys.nvars, 2);
  ASSERT_EQ(sys.field.size(), 2u);
  EXPECT_FALSE(sys.field_is_polynomial());
  ASSERT_EQ(sys.constraints.size(), 1u);
  const VectorXd x = (VectorXd(2) << 0.3, -0.7).finished();
  const double s2 = -std::cbrt(0.7);
  EXPECT_NEAR(sys.field[0].Evaluate(x), -s2, 1e-14);
  EXPECT_NEAR(sys.field[1].Evaluate(x), 2 * (std::pow(0.3, 2.0 / 3) - 1) * s2 + std::cbrt(0.3), 1e-14);
  EXPECT_THROW(ParseSystem("f1 = x1; f3 = x1;"), ParseError);
  EXPECT_THROW(ParseSystem("h1 = x1;"), ParseError);
  EXPECT_THROW(ParseSystem("f1 = x1"), ParseError);
  try {
    ParseSystem("f1 = x1;\nf2 = x3;");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 14u);
  }
}

TEST(SignedPowerTest, ScalarFiniteTimeSubstitution) {
  for (int r = 2; r <= 10; ++r) {
    const Rational eta(1, r);
    // f(x) = -(1/eta) sign(x) |x|^(1 - eta).
    SignedPowerExpr f = SignedPowerExpr::Sign(1, 0) * SignedPowerExpr::AbsPower(1, 0, Rational(1) - eta);
    f *= -ToDouble(Rational(1) / eta);
    const auto ft = SubstituteSignedPower({f}, Rational(r));
    EXPECT_EQ(ft[0].ToString(), (-SignedPowerExpr::Sign(1, 0)).ToString());
    EXPECT_EQ(ToPolynomial(ft[0], SignedPowerExpr::AbsPower(1, 0, Rational(1))), P("-x1", 1));
  }
}

TEST(SignedPowerTest, IdentitySubstitution) {
  const auto ft = SubstituteSignedPower({SignedPowerExpr(P("-x1", 1))}, Rational(1));
  EXPECT_EQ(ToPolynomial(ft[0]), P("-x1", 1));
}

TEST(SignedPowerTest, FiniteTimeVanDerPolBecomesPolynomial) {
  const ParsedSystem sys = ParseSystem(
      "f1 = -sign(x2)*abs(x2)^(1/3);"
      "f2 = 2*(abs(x1)^(2/3) - 1)*sign(x2)*abs(x2)^(1/3) + sign(x1)*abs(x1)^(1/3);");
  const auto ft = SubstituteSignedPower(sys.field, Rational(3));
  const SignedPowerExpr h = MonomialMultiplier(2, {2, 2});
  const Polynomial c1 = ToPolynomial(ft[0], h);
  const Polynomial c2 = ToPolynomial(ft[1], h);
  EXPECT_LT(c1.DistanceTo(P("-x2^3", 2) * (1.0 / 3.0)), 1e-15);
  EXPECT_LT(c2.DistanceTo(P("(-2*(1 - x1^2)*x1^2*x2 + x1^3)", 2) * (1.0 / 3.0)), 1e-15);
  EXPECT_THROW(ToPolynomial(ft[0]), NotPolynomial);
}

TEST(SignedPowerTest, ToPolynomialExamples) {
  EXPECT_EQ(ToPolynomial(-SignedPowerExpr::Sign(1, 0), SignedPowerExpr::AbsPower(1, 0, Rational(1))), P("-x1", 1));
  EXPECT_EQ(ToPolynomial(SignedPowerExpr(P("x1^2", 1))), P("x1^2", 1));
  try {
    ToPolynomial(SignedPowerExpr::AbsPower(1, 0, Rational(1, 2)));
    FAIL();
  } catch (const NotPolynomial& e) {
    EXPECT_NE(e.term().find("abs(x1)^(1/2)"), std::string::npos);
  }
}

TEST(SignedPowerTest, SubstitutionObeysChainRule) {
  // z = sign(x)|x|^(1/r) evolves with dz/dt = f_r(z) when x' = f(x).
  const ParsedSystem sys = ParseSystem(
      "f1 = -sign(x2)*abs(x2)^(1/3);"
      "f2 = 2*(abs(x1)^(2/3) - 1)*sign(x2)*abs(x2)^(1/3) + sign(x1)*abs(x1)^(1/3);");
  std::mt19937_64 rng(9);
  for (const Rational r : {Rational(3), Rational(2), Rational(5, 2)}) {
    const auto ft = SubstituteSignedPower(sys.field, r);
    auto to_z = [&](const VectorXd& x) {
      VectorXd z(x.size());
      for (int i = 0; i < x.size(); ++i) {
        z(i) = std::copysign(std::pow(std::abs(x(i)), 1.0 / ToDouble(r)), x(i));
      }
      return z;
    };
    for (int k = 0; k < 20; ++k) {
      VectorXd x = RandomPoint(rng, 2, -1.5, 1.5);
      if (x.cwiseAbs().minCoeff() < 0.05) continue;
      const double h = 1e-7;
      const VectorXd fx = EvaluateField(sys.field, x);
      const VectorXd dz = (to_z(x + h * fx) - to_z(x - h * fx)) / (2 * h);
      const VectorXd expect = EvaluateField(ft, to_z(x));
      for (int i = 0; i < 2; ++i) EXPECT_NEAR(dz(i), expect(i), 1e-4 * (1.0 + std::abs(expect(i))));
    }
  }
}

TEST(SignedPowerTest, ScaleArgumentsAndCompose) {
  const Polynomial p = P("x1^2*x2 - 3*x2 + 1", 2);
  const Polynomial scaled = p.ScaleArguments(2.0);
  const VectorXd x = (VectorXd(2) << 0.4, -1.1).finished();
  EXPECT_NEAR(scaled.Evaluate(x), p.Evaluate(2.0 * x), 1e-12);
  const Polynomial composed = p.Compose({P("x1 + x2", 2), P("x1*x2", 2)});
  const VectorXd y = (VectorXd(2) << x(0) + x(1), x(0) * x(1)).finished();
  EXPECT_NEAR(composed.Evaluate(x), p.Evaluate(y), 1e-12);
}

}  // namespace
}  // namespace ratecert
