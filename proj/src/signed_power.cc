#include "ratecert/signed_power.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace ratecert {

namespace {

double SignOf(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

bool FactorsLess(const std::vector<SignedPowerFactor>& a, const std::vector<SignedPowerFactor>& b) {
  return std::lexicographical_compare(
      a.begin(), a.end(), b.begin(), b.end(), [](const auto& x, const auto& y) {
        if (x.var != y.var) return x.var < y.var;
        if (x.sign_exp != y.sign_exp) return x.sign_exp < y.sign_exp;
        return x.abs_exp < y.abs_exp;
      });
}

std::vector<SignedPowerFactor> MultiplyFactors(const std::vector<SignedPowerFactor>& a,
                                               const std::vector<SignedPowerFactor>& b) {
  std::vector<SignedPowerFactor> out;
  std::size_t i = 0, j = 0;
  auto push = [&out](SignedPowerFactor f) {
    if (f.sign_exp != 0 || f.abs_exp.numerator() != 0) out.push_back(f);
  };
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].var < b[j].var)) {
      push(a[i++]);
    } else if (i == a.size() || b[j].var < a[i].var) {
      push(b[j++]);
    } else {
      SignedPowerFactor f{a[i].var, (a[i].sign_exp + b[j].sign_exp) % 2, a[i].abs_exp + b[j].abs_exp};
      push(f);
      ++i;
      ++j;
    }
  }
  return out;
}

std::string TermToString(const SignedPowerTerm& t, const std::vector<std::string>& names) {
  std::string out = fmt::format("{:.17g}", t.coeff);
  for (const auto& f : t.factors) {
    const auto& n = names[static_cast<std::size_t>(f.var)];
    if (f.sign_exp) out += fmt::format("*sign({})", n);
    if (f.abs_exp.numerator() != 0) out += fmt::format("*abs({})^({})", n, ToString(f.abs_exp));
  }
  return out;
}

}  // namespace

double ToDouble(const Rational& q) {
  return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator());
}

std::string ToString(const Rational& q) {
  if (q.denominator() == 1) return fmt::format("{}", q.numerator());
  return fmt::format("{}/{}", q.numerator(), q.denominator());
}

SignedPowerExpr::SignedPowerExpr(int nvars, double constant) : nvars_(nvars) {
  if (constant != 0.0) terms_.push_back({constant, {}});
}

SignedPowerExpr::SignedPowerExpr(const Polynomial& p) : nvars_(p.nvars()) {
  for (const auto& [m, c] : p.terms()) {
    SignedPowerTerm t{c, {}};
    for (int i = 0; i < m.nvars(); ++i) {
      if (m[i] != 0) t.factors.push_back({i, m[i] % 2, Rational(m[i])});
    }
    terms_.push_back(std::move(t));
  }
  Normalize();
}

SignedPowerExpr SignedPowerExpr::Variable(int nvars, int var) {
  SignedPowerExpr e(nvars);
  e.terms_.push_back({1.0, {{var, 1, Rational(1)}}});
  return e;
}

SignedPowerExpr SignedPowerExpr::Sign(int nvars, int var) {
  SignedPowerExpr e(nvars);
  e.terms_.push_back({1.0, {{var, 1, Rational(0)}}});
  return e;
}

SignedPowerExpr SignedPowerExpr::AbsPower(int nvars, int var, Rational exponent) {
  SignedPowerExpr e(nvars, 1.0);
  if (exponent.numerator() != 0) e.terms_.front().factors.push_back({var, 0, exponent});
  return e;
}

SignedPowerExpr SignedPowerExpr::SquaredNormPower(int nvars, Rational exponent) {
  if (nvars == 1) return AbsPower(1, 0, exponent * 2);
  if (exponent.denominator() != 1 || exponent.numerator() < 0) {
    throw NotPolynomial(fmt::format("(x^T x)^({}) is not polynomial for n = {}", ratecert::ToString(exponent), nvars),
                        "(x^T x)^(" + ratecert::ToString(exponent) + ")");
  }
  return SignedPowerExpr(Polynomial::SquaredNormPower(nvars, static_cast<int>(exponent.numerator())));
}

double SignedPowerExpr::Evaluate(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (const auto& t : terms_) {
    double term = t.coeff;
    for (const auto& f : t.factors) {
      const double xi = x(f.var);
      if (f.sign_exp) term *= SignOf(xi);
      if (f.abs_exp.numerator() != 0) {
        if (f.abs_exp.denominator() == 1) {
          term *= std::pow(std::abs(xi), static_cast<double>(f.abs_exp.numerator()));
        } else {
          term *= std::pow(std::abs(xi), ToDouble(f.abs_exp));
        }
      }
    }
    v += term;
  }
  return v;
}

void SignedPowerExpr::AddTerm(SignedPowerTerm term) {
  if (term.coeff != 0.0) terms_.push_back(std::move(term));
}

void SignedPowerExpr::Normalize() {
  std::sort(terms_.begin(), terms_.end(),
            [](const auto& a, const auto& b) { return FactorsLess(a.factors, b.factors); });
  std::vector<SignedPowerTerm> merged;
  for (auto& t : terms_) {
    if (!merged.empty() && merged.back().factors == t.factors) {
      merged.back().coeff += t.coeff;
    } else {
      merged.push_back(std::move(t));
    }
  }
  double mx = 0.0;
  for (const auto& t : merged) mx = std::max(mx, std::abs(t.coeff));
  std::erase_if(merged, [mx](const auto& t) {
    return t.coeff == 0.0 || std::abs(t.coeff) < Polynomial::kPruneRelative * mx;
  });
  terms_ = std::move(merged);
}

SignedPowerExpr SignedPowerExpr::operator-() const {
  SignedPowerExpr out = *this;
  for (auto& t : out.terms_) t.coeff = -t.coeff;
  return out;
}

SignedPowerExpr& SignedPowerExpr::operator+=(const SignedPowerExpr& other) {
  if (nvars_ != other.nvars_) throw DimensionMismatch("SignedPowerExpr add");
  for (const auto& t : other.terms_) AddTerm(t);
  Normalize();
  return *this;
}

SignedPowerExpr& SignedPowerExpr::operator-=(const SignedPowerExpr& other) { return *this += -other; }

SignedPowerExpr& SignedPowerExpr::operator*=(const SignedPowerExpr& other) {
  if (nvars_ != other.nvars_) throw DimensionMismatch("SignedPowerExpr multiply");
  std::vector<SignedPowerTerm> product;
  for (const auto& a : terms_) {
    for (const auto& b : other.terms_) {
      product.push_back({a.coeff * b.coeff, MultiplyFactors(a.factors, b.factors)});
    }
  }
  terms_ = std::move(product);
  Normalize();
  return *this;
}

SignedPowerExpr& SignedPowerExpr::operator*=(double s) {
  for (auto& t : terms_) t.coeff *= s;
  Normalize();
  return *this;
}

SignedPowerExpr SignedPowerExpr::Pow(int power) const {
  if (power < 0) throw std::invalid_argument("SignedPowerExpr::Pow: negative power");
  SignedPowerExpr out(nvars_, 1.0);
  for (int i = 0; i < power; ++i) out *= *this;
  return out;
}

bool SignedPowerExpr::IsPolynomial() const {
  for (const auto& t : terms_) {
    for (const auto& f : t.factors) {
      if (f.abs_exp.denominator() != 1 || f.abs_exp.numerator() < 0) return false;
      if ((f.abs_exp.numerator() % 2) != f.sign_exp) return false;
    }
  }
  return true;
}

std::string SignedPowerExpr::ToString(const std::vector<std::string>& names) const {
  if (terms_.empty()) return "0";
  const auto var_names = names.empty() ? DefaultVariableNames(nvars_) : names;
  std::string out;
  for (const auto& t : terms_) {
    if (!out.empty()) out += " + ";
    out += TermToString(t, var_names);
  }
  return out;
}

SignedPowerExpr operator+(SignedPowerExpr a, const SignedPowerExpr& b) { return a += b; }
SignedPowerExpr operator-(SignedPowerExpr a, const SignedPowerExpr& b) { return a -= b; }
SignedPowerExpr operator*(SignedPowerExpr a, const SignedPowerExpr& b) { return a *= b; }
SignedPowerExpr operator*(double s, SignedPowerExpr a) { return a *= s; }

SignedPowerExpr SubstituteScalar(const SignedPowerExpr& g, const Rational& r) {
  if (r.numerator() <= 0) throw std::invalid_argument("SubstituteSignedPower: r must be positive");
  // sign(x) = sign(z), |x|^q = |z|^(r q).
  SignedPowerExpr out(g.nvars());
  for (const auto& t : g.terms()) {
    SignedPowerExpr term(g.nvars(), t.coeff);
    for (const auto& f : t.factors) {
      if (f.sign_exp) term *= SignedPowerExpr::Sign(g.nvars(), f.var);
      if (f.abs_exp.numerator() != 0) term *= SignedPowerExpr::AbsPower(g.nvars(), f.var, f.abs_exp * r);
    }
    out += term;
  }
  return out;
}

std::vector<SignedPowerExpr> SubstituteSignedPower(const std::vector<SignedPowerExpr>& f,
                                                   const Rational& r) {
  std::vector<SignedPowerExpr> out;
  out.reserve(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const int n = f[i].nvars();
    SignedPowerExpr comp = SubstituteScalar(f[i], r);
    comp *= SignedPowerExpr::AbsPower(n, static_cast<int>(i), Rational(1) - r);
    comp *= ToDouble(Rational(1) / r);
    out.push_back(std::move(comp));
  }
  return out;
}

Polynomial ToPolynomial(const SignedPowerExpr& e, const SignedPowerExpr& multiplier) {
  const SignedPowerExpr product = multiplier * e;
  const int n = product.nvars();
  Polynomial out(n);
  for (const auto& t : product.terms()) {
    std::vector<int> exps(static_cast<std::size_t>(n), 0);
    for (const auto& f : t.factors) {
      const bool integral = f.abs_exp.denominator() == 1 && f.abs_exp.numerator() >= 0;
      if (!integral || (f.abs_exp.numerator() % 2) != f.sign_exp) {
        const std::string term = TermToString(t, DefaultVariableNames(n));
        throw NotPolynomial("term is not a polynomial monomial: " + term, term);
      }
      exps[static_cast<std::size_t>(f.var)] = static_cast<int>(f.abs_exp.numerator());
    }
    out.AddTerm(Monomial(std::move(exps)), t.coeff);
  }
  return out;
}

Polynomial ToPolynomial(const SignedPowerExpr& e) {
  return ToPolynomial(e, SignedPowerExpr(e.nvars(), 1.0));
}

SignedPowerExpr MonomialMultiplier(int nvars, const std::vector<int>& lambda) {
  if (static_cast<int>(lambda.size()) != nvars) throw DimensionMismatch("MonomialMultiplier");
  SignedPowerExpr h(nvars, 1.0);
  for (int i = 0; i < nvars; ++i) {
    const int l = lambda[static_cast<std::size_t>(i)];
    if (l != 0) h *= SignedPowerExpr::AbsPower(nvars, i, Rational(l));
  }
  return h;
}

Eigen::VectorXd EvaluateField(const std::vector<SignedPowerExpr>& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) out(static_cast<Eigen::Index>(i)) = f[i].Evaluate(x);
  return out;
}

}  // namespace ratecert
