#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>
#include <Eigen/Dense>

#include "ratecert/polynomial.h"

namespace ratecert {

using Rational = boost::rational<long long>;

double ToDouble(const Rational& q);
std::string ToString(const Rational& q);

/// One factor sign(x_var)^sign_exp * |x_var|^abs_exp.
struct SignedPowerFactor {
  int var = 0;
  int sign_exp = 0;  // 0 or 1
  Rational abs_exp{0};

  bool operator==(const SignedPowerFactor&) const = default;
};

struct SignedPowerTerm {
  double coeff = 0.0;
  /// Sorted by var, at most one factor per variable, no trivial factors.
  std::vector<SignedPowerFactor> factors;
};

/// Raised by ToPolynomial when a term is not a monomial in the variables.
class NotPolynomial : public std::runtime_error {
 public:
  NotPolynomial(const std::string& what, std::string term)
      : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

/// Sum of terms c * prod_i sign(x_i)^s_i |x_i|^q_i with exact rational q_i.
///
/// Absolute exponents may be negative in intermediate results (e.g. after the
/// finite-time substitution); evaluation is then finite away from the axes.
/// sign(x)^2 is treated as 1.
class SignedPowerExpr {
 public:
  SignedPowerExpr() = default;
  explicit SignedPowerExpr(int nvars) : nvars_(nvars) {}
  SignedPowerExpr(int nvars, double constant);
  explicit SignedPowerExpr(const Polynomial& p);

  static SignedPowerExpr Variable(int nvars, int var);
  static SignedPowerExpr Sign(int nvars, int var);
  static SignedPowerExpr AbsPower(int nvars, int var, Rational exponent);
  /// (x^T x)^exponent; exact for integer exponents, or for n = 1 as |x|^(2e).
  static SignedPowerExpr SquaredNormPower(int nvars, Rational exponent);

  int nvars() const { return nvars_; }
  const std::vector<SignedPowerTerm>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  double Evaluate(const Eigen::VectorXd& x) const;

  SignedPowerExpr operator-() const;
  SignedPowerExpr& operator+=(const SignedPowerExpr& other);
  SignedPowerExpr& operator-=(const SignedPowerExpr& other);
  SignedPowerExpr& operator*=(const SignedPowerExpr& other);
  SignedPowerExpr& operator*=(double s);
  SignedPowerExpr Pow(int power) const;

  /// True when every term is c * prod x_i^a_i with integer a_i >= 0.
  bool IsPolynomial() const;

  std::string ToString(const std::vector<std::string>& names = {}) const;

 private:
  void AddTerm(SignedPowerTerm term);
  void Normalize();

  int nvars_ = 0;
  std::vector<SignedPowerTerm> terms_;
};

SignedPowerExpr operator+(SignedPowerExpr a, const SignedPowerExpr& b);
SignedPowerExpr operator-(SignedPowerExpr a, const SignedPowerExpr& b);
SignedPowerExpr operator*(SignedPowerExpr a, const SignedPowerExpr& b);
SignedPowerExpr operator*(double s, SignedPowerExpr a);

/// f_r(z) = (1/r) f(sign(z)|z|^r) |z|^(1-r), componentwise in the last factor.
std::vector<SignedPowerExpr> SubstituteSignedPower(const std::vector<SignedPowerExpr>& f,
                                                   const Rational& r);

/// g(sign(z)|z|^r) for a scalar expression (domain constraints).
SignedPowerExpr SubstituteScalar(const SignedPowerExpr& g, const Rational& r);

/// Exact polynomial for multiplier * e; throws NotPolynomial naming the first
/// term with a fractional/negative exponent or unmatched sign factor.
Polynomial ToPolynomial(const SignedPowerExpr& e, const SignedPowerExpr& multiplier);
Polynomial ToPolynomial(const SignedPowerExpr& e);

/// prod_i |z_i|^lambda_i.
SignedPowerExpr MonomialMultiplier(int nvars, const std::vector<int>& lambda);

/// Evaluates a vector of expressions.
Eigen::VectorXd EvaluateField(const std::vector<SignedPowerExpr>& f, const Eigen::VectorXd& x);

}  // namespace ratecert
