#include "ratecert/polynomial.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace ratecert {

namespace {

void CheckSameDimension(int a, int b, const char* what) {
  if (a != b) {
    throw DimensionMismatch(fmt::format("{}: nvars {} vs {}", what, a, b));
  }
}

// Integer power of a double by repeated squaring.
double IntPow(double base, int exp) {
  double result = 1.0;
  while (exp > 0) {
    if (exp & 1) result *= base;
    base *= base;
    exp >>= 1;
  }
  return result;
}

std::size_t Binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::size_t result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  }
  return result;
}

// Recursively enumerates exponent vectors of exact total degree `degree`,
// leading exponents descending.
void EnumerateDegree(int nvars, int degree, int pos, std::vector<int>& current,
                     std::vector<Monomial>& out) {
  if (pos == nvars - 1) {
    current[static_cast<std::size_t>(pos)] = degree;
    out.emplace_back(current);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    current[static_cast<std::size_t>(pos)] = e;
    EnumerateDegree(nvars, degree - e, pos + 1, current, out);
  }
  current[static_cast<std::size_t>(pos)] = 0;
}

std::string FormatCoefficient(double c) { return fmt::format("{:.17g}", c); }

}  // namespace

Monomial::Monomial(std::vector<int> exponents) : exponents_(std::move(exponents)) {
  for (int e : exponents_) {
    if (e < 0) throw std::invalid_argument("Monomial: negative exponent");
    degree_ += e;
  }
}

Monomial Monomial::Variable(int nvars, int index, int power) {
  std::vector<int> e(static_cast<std::size_t>(nvars), 0);
  e.at(static_cast<std::size_t>(index)) = power;
  return Monomial(std::move(e));
}

Monomial Monomial::operator*(const Monomial& other) const {
  CheckSameDimension(nvars(), other.nvars(), "Monomial product");
  Monomial out = *this;
  for (std::size_t i = 0; i < exponents_.size(); ++i) out.exponents_[i] += other.exponents_[i];
  out.degree_ += other.degree_;
  return out;
}

bool Monomial::Divides(const Monomial& other) const {
  for (std::size_t i = 0; i < exponents_.size(); ++i) {
    if (exponents_[i] > other.exponents_[i]) return false;
  }
  return true;
}

double Monomial::Evaluate(std::span<const double> x) const {
  double v = 1.0;
  for (std::size_t i = 0; i < exponents_.size(); ++i) {
    if (exponents_[i] != 0) v *= IntPow(x[i], exponents_[i]);
  }
  return v;
}

bool Monomial::operator<(const Monomial& other) const {
  if (degree_ != other.degree_) return degree_ < other.degree_;
  return exponents_ > other.exponents_;
}

std::string Monomial::ToString(const std::vector<std::string>& names) const {
  const auto var_names = names.empty() ? DefaultVariableNames(nvars()) : names;
  std::string out;
  for (std::size_t i = 0; i < exponents_.size(); ++i) {
    if (exponents_[i] == 0) continue;
    if (!out.empty()) out += "*";
    out += var_names[i];
    if (exponents_[i] > 1) out += fmt::format("^{}", exponents_[i]);
  }
  return out.empty() ? "1" : out;
}

std::vector<Monomial> MonomialBasis(int nvars, int min_degree, int max_degree) {
  if (nvars <= 0) throw std::invalid_argument("MonomialBasis: nvars must be positive");
  if (min_degree < 0 || min_degree > max_degree) {
    throw std::invalid_argument("MonomialBasis: need 0 <= min_degree <= max_degree");
  }
  std::vector<Monomial> out;
  out.reserve(MonomialBasisSize(nvars, min_degree, max_degree));
  std::vector<int> current(static_cast<std::size_t>(nvars), 0);
  for (int d = min_degree; d <= max_degree; ++d) EnumerateDegree(nvars, d, 0, current, out);
  return out;
}

std::size_t MonomialBasisSize(int nvars, int min_degree, int max_degree) {
  const std::size_t upto = Binomial(nvars + max_degree, nvars);
  const std::size_t below = min_degree > 0 ? Binomial(nvars + min_degree - 1, nvars) : 0;
  return upto - below;
}

Polynomial::Polynomial(int nvars, double constant) : nvars_(nvars) {
  if (constant != 0.0) terms_.emplace(Monomial(nvars), constant);
}

Polynomial::Polynomial(const Monomial& m, double coeff) : nvars_(m.nvars()) {
  if (coeff != 0.0) terms_.emplace(m, coeff);
}

Polynomial::Polynomial(int nvars, TermMap terms) : nvars_(nvars), terms_(std::move(terms)) {
  for (const auto& [m, c] : terms_) CheckSameDimension(nvars_, m.nvars(), "Polynomial");
  Prune();
}

Polynomial Polynomial::Variable(int nvars, int index) {
  return Polynomial(Monomial::Variable(nvars, index), 1.0);
}

Polynomial Polynomial::SquaredNormPower(int nvars, int power) {
  Polynomial sq(nvars);
  for (int i = 0; i < nvars; ++i) sq.AddTerm(Monomial::Variable(nvars, i, 2), 1.0);
  return sq.Pow(power);
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

int Polynomial::min_degree() const {
  return terms_.empty() ? -1 : terms_.begin()->first.degree();
}

bool Polynomial::is_homogeneous() const { return degree() == min_degree(); }

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coefficient() const {
  double mx = 0.0;
  for (const auto& [m, c] : terms_) mx = std::max(mx, std::abs(c));
  return mx;
}

double Polynomial::Evaluate(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != nvars_) {
    throw DimensionMismatch(fmt::format("Evaluate: point of size {} for nvars {}", x.size(), nvars_));
  }
  double v = 0.0;
  for (const auto& [m, c] : terms_) v += c * m.Evaluate(x);
  return v;
}

Polynomial Polynomial::Derivative(int var) const {
  Polynomial out(nvars_);
  for (const auto& [m, c] : terms_) {
    const int e = m[var];
    if (e == 0) continue;
    std::vector<int> ex = m.exponents();
    ex[static_cast<std::size_t>(var)] -= 1;
    out.terms_.emplace(Monomial(std::move(ex)), c * e);
  }
  return out;
}

std::vector<Polynomial> Polynomial::Gradient() const {
  std::vector<Polynomial> g;
  g.reserve(static_cast<std::size_t>(nvars_));
  for (int i = 0; i < nvars_; ++i) g.push_back(Derivative(i));
  return g;
}

Polynomial Polynomial::Pow(int power) const {
  if (power < 0) throw std::invalid_argument("Polynomial::Pow: negative power");
  Polynomial result(nvars_, 1.0);
  Polynomial base = *this;
  while (power > 0) {
    if (power & 1) result *= base;
    power >>= 1;
    if (power > 0) base *= base;
  }
  return result;
}

Polynomial Polynomial::ScaleArguments(double s) const {
  Polynomial out(nvars_);
  for (const auto& [m, c] : terms_) out.terms_.emplace(m, c * IntPow(s, m.degree()));
  out.Prune();
  return out;
}

Polynomial Polynomial::Compose(const std::vector<Polynomial>& q) const {
  CheckSameDimension(nvars_, static_cast<int>(q.size()), "Compose");
  if (q.empty()) return *this;
  const int out_vars = q.front().nvars();
  // Cache powers of each substituted component.
  std::vector<std::vector<Polynomial>> powers(q.size());
  Polynomial out(out_vars);
  for (const auto& [m, c] : terms_) {
    Polynomial term(out_vars, c);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const int e = m[static_cast<int>(i)];
      if (e == 0) continue;
      auto& pw = powers[i];
      if (pw.empty()) pw.push_back(Polynomial(out_vars, 1.0));
      while (static_cast<int>(pw.size()) <= e) pw.push_back(pw.back() * q[i]);
      term *= pw[static_cast<std::size_t>(e)];
    }
    out += term;
  }
  return out;
}

Polynomial Polynomial::operator-() const {
  Polynomial out = *this;
  for (auto& [m, c] : out.terms_) c = -c;
  return out;
}

void Polynomial::AddTerm(const Monomial& m, double coeff) {
  CheckSameDimension(nvars_, m.nvars(), "AddTerm");
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.emplace(m, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  CheckSameDimension(nvars_, other.nvars_, "add");
  for (const auto& [m, c] : other.terms_) AddTerm(m, c);
  Prune();
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  CheckSameDimension(nvars_, other.nvars_, "subtract");
  for (const auto& [m, c] : other.terms_) AddTerm(m, -c);
  Prune();
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, c] : terms_) c *= s;
  return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& other) {
  CheckSameDimension(nvars_, other.nvars_, "multiply");
  TermMap product;
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : other.terms_) {
      product[ma * mb] += ca * cb;
    }
  }
  terms_ = std::move(product);
  Prune();
  return *this;
}

void Polynomial::Prune() {
  const double threshold = kPruneRelative * max_abs_coefficient();
  std::erase_if(terms_, [threshold](const auto& kv) {
    return kv.second == 0.0 || std::abs(kv.second) < threshold;
  });
}

bool Polynomial::operator==(const Polynomial& other) const {
  if (nvars_ != other.nvars_) return false;
  const double ta = kPruneRelative * max_abs_coefficient();
  const double tb = kPruneRelative * other.max_abs_coefficient();
  auto significant = [](const TermMap& t, double thr) {
    TermMap out;
    for (const auto& [m, c] : t) {
      if (std::abs(c) >= thr) out.emplace(m, c);
    }
    return out;
  };
  return significant(terms_, ta) == significant(other.terms_, tb);
}

double Polynomial::DistanceTo(const Polynomial& other) const {
  CheckSameDimension(nvars_, other.nvars_, "DistanceTo");
  double d = 0.0;
  for (const auto& [m, c] : terms_) d = std::max(d, std::abs(c - other.coefficient(m)));
  for (const auto& [m, c] : other.terms_) {
    if (!terms_.contains(m)) d = std::max(d, std::abs(c));
  }
  return d;
}

std::string Polynomial::ToString(const std::vector<std::string>& names) const {
  if (terms_.empty()) return "0";
  std::string out;
  // Highest degree first reads naturally.
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [m, c] = *it;
    const bool negative = std::signbit(c);
    const double mag = std::abs(c);
    if (out.empty()) {
      if (negative) out += "-";
    } else {
      out += negative ? " - " : " + ";
    }
    if (m.degree() == 0) {
      out += FormatCoefficient(mag);
    } else if (mag == 1.0) {
      out += m.ToString(names);
    } else {
      out += FormatCoefficient(mag) + "*" + m.ToString(names);
    }
  }
  return out;
}

Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial out = a;
  out *= b;
  return out;
}
Polynomial operator*(Polynomial a, double s) { return a *= s; }
Polynomial operator*(double s, Polynomial a) { return a *= s; }

PolyVectorField::PolyVectorField(std::vector<Polynomial> comps)
    : nvars(comps.empty() ? 0 : comps.front().nvars()), components(std::move(comps)) {
  for (const auto& c : components) CheckSameDimension(nvars, c.nvars(), "PolyVectorField");
  if (static_cast<int>(components.size()) != nvars) {
    throw DimensionMismatch(fmt::format("PolyVectorField: {} components over {} variables",
                                        components.size(), nvars));
  }
}

int PolyVectorField::degree() const {
  int d = 0;
  for (const auto& c : components) d = std::max(d, c.degree());
  return d;
}

Eigen::VectorXd PolyVectorField::Evaluate(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(nvars);
  for (int i = 0; i < nvars; ++i) out(i) = components[static_cast<std::size_t>(i)].Evaluate(x);
  return out;
}

Polynomial LieDerivative(const Polynomial& V, const PolyVectorField& f) {
  CheckSameDimension(V.nvars(), f.nvars, "LieDerivative");
  Polynomial out(V.nvars());
  for (int i = 0; i < f.nvars; ++i) {
    out += V.Derivative(i) * f.components[static_cast<std::size_t>(i)];
  }
  return out;
}

SemialgebraicSet::SemialgebraicSet(int n, std::vector<Polynomial> g)
    : nvars(n), constraints(std::move(g)) {
  for (const auto& c : constraints) CheckSameDimension(nvars, c.nvars(), "SemialgebraicSet");
}

SemialgebraicSet SemialgebraicSet::Ball(int n, double radius) {
  return SemialgebraicSet(n, {Polynomial(n, radius * radius) - Polynomial::SquaredNormPower(n, 1)});
}

bool SemialgebraicSet::Contains(const Eigen::VectorXd& x, double tol) const {
  return Margin(x) >= -tol;
}

double SemialgebraicSet::Margin(const Eigen::VectorXd& x) const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& g : constraints) m = std::min(m, g.Evaluate(x));
  return m;
}

std::vector<std::string> DefaultVariableNames(int nvars) {
  std::vector<std::string> names;
  for (int i = 1; i <= nvars; ++i) names.push_back(fmt::format("x{}", i));
  return names;
}

}  // namespace ratecert
