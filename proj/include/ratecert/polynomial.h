#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ratecert {

/// Thrown when two objects over different numbers of indeterminates meet.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exponent vector of a monomial x1^a1 ... xn^an.
///
/// Ordering is graded-lexicographic: lower total degree first; within one
/// degree, larger leading exponents first (so x1^2 < x1*x2 < x2^2).
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(int nvars) : exponents_(static_cast<std::size_t>(nvars), 0) {}
  explicit Monomial(std::vector<int> exponents);

  static Monomial Variable(int nvars, int index, int power = 1);

  int nvars() const { return static_cast<int>(exponents_.size()); }
  int degree() const { return degree_; }
  int operator[](int i) const { return exponents_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& exponents() const { return exponents_; }

  Monomial operator*(const Monomial& other) const;
  bool Divides(const Monomial& other) const;

  double Evaluate(std::span<const double> x) const;

  bool operator==(const Monomial& other) const { return exponents_ == other.exponents_; }
  bool operator<(const Monomial& other) const;

  std::string ToString(const std::vector<std::string>& names = {}) const;

 private:
  std::vector<int> exponents_;
  int degree_ = 0;
};

/// All monomials in `nvars` variables with min_degree <= degree <= max_degree,
/// in graded-lex order.
std::vector<Monomial> MonomialBasis(int nvars, int min_degree, int max_degree);

/// Number of monomials returned by MonomialBasis, from the binomial formula.
std::size_t MonomialBasisSize(int nvars, int min_degree, int max_degree);

/// Sparse multivariate polynomial with binary64 coefficients.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double>;

  /// Terms below this fraction of the largest coefficient are dropped.
  static constexpr double kPruneRelative = 1e-14;

  Polynomial() = default;
  explicit Polynomial(int nvars) : nvars_(nvars) {}
  Polynomial(int nvars, double constant);
  Polynomial(const Monomial& m, double coeff = 1.0);
  Polynomial(int nvars, TermMap terms);

  static Polynomial Variable(int nvars, int index);
  /// (x^T x)^power.
  static Polynomial SquaredNormPower(int nvars, int power);

  int nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  /// Highest total degree; -1 for the zero polynomial.
  int degree() const;
  /// Lowest total degree among stored terms; -1 for the zero polynomial.
  int min_degree() const;
  bool is_homogeneous() const;
  double coefficient(const Monomial& m) const;
  double max_abs_coefficient() const;

  double Evaluate(std::span<const double> x) const;
  double Evaluate(const Eigen::VectorXd& x) const {
    return Evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }

  Polynomial Derivative(int var) const;
  std::vector<Polynomial> Gradient() const;
  Polynomial Pow(int power) const;
  /// p(s * x); coefficient of a degree-j term is multiplied by s^j.
  Polynomial ScaleArguments(double s) const;
  /// Substitutes x_i -> q_i (q polynomials in a possibly different nvars).
  Polynomial Compose(const std::vector<Polynomial>& q) const;

  Polynomial operator-() const;
  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);
  Polynomial& operator*=(const Polynomial& other);

  void AddTerm(const Monomial& m, double coeff);

  /// Equality after dropping coefficients below 1e-14 of the largest one.
  bool operator==(const Polynomial& other) const;

  /// Max abs coefficient of (this - other).
  double DistanceTo(const Polynomial& other) const;

  /// Text form accepted by ParsePolynomial (round-trips exactly).
  std::string ToString(const std::vector<std::string>& names = {}) const;

 private:
  void Prune();

  int nvars_ = 0;
  TermMap terms_;
};

Polynomial operator+(Polynomial a, const Polynomial& b);
Polynomial operator-(Polynomial a, const Polynomial& b);
Polynomial operator*(const Polynomial& a, const Polynomial& b);
Polynomial operator*(Polynomial a, double s);
Polynomial operator*(double s, Polynomial a);

/// Vector field with polynomial components.
struct PolyVectorField {
  int nvars = 0;
  std::vector<Polynomial> components;

  PolyVectorField() = default;
  explicit PolyVectorField(std::vector<Polynomial> comps);

  int degree() const;
  Eigen::VectorXd Evaluate(const Eigen::VectorXd& x) const;
};

/// grad(V) . f
Polynomial LieDerivative(const Polynomial& V, const PolyVectorField& f);

/// Omega = {x | g_i(x) >= 0}; no constraints means all of R^n.
struct SemialgebraicSet {
  int nvars = 0;
  std::vector<Polynomial> constraints;

  SemialgebraicSet() = default;
  explicit SemialgebraicSet(int n) : nvars(n) {}
  SemialgebraicSet(int n, std::vector<Polynomial> g);

  static SemialgebraicSet Ball(int n, double radius);

  bool is_global() const { return constraints.empty(); }
  bool Contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  /// min_i g_i(x); +inf for a global set.
  double Margin(const Eigen::VectorXd& x) const;
};

/// Default variable names x1..xn.
std::vector<std::string> DefaultVariableNames(int nvars);

}  // namespace ratecert
