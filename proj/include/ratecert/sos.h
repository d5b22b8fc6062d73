#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ratecert/polynomial.h"
#include "ratecert/sdp.h"

namespace ratecert {

/// p_0(x) + sum_v theta_v p_v(x): a polynomial affine in scalar decision
/// variables theta.
class AffinePolynomial {
 public:
  AffinePolynomial() = default;
  explicit AffinePolynomial(int nvars) : constant_(nvars) {}
  AffinePolynomial(const Polynomial& constant) : constant_(constant) {}  // NOLINT: implicit lift
  static AffinePolynomial Variable(int nvars, int id, const Polynomial& coefficient);

  int nvars() const { return constant_.nvars(); }
  const Polynomial& constant() const { return constant_; }
  const std::map<int, Polynomial>& linear() const { return linear_; }

  int degree() const;
  int min_degree() const;
  bool is_homogeneous() const;

  /// Substitutes decision values.
  Polynomial Evaluate(const std::vector<double>& values) const;
  AffinePolynomial Derivative(int var) const;
  /// grad(this) . f
  AffinePolynomial LieDerivative(const PolyVectorField& f) const;

  AffinePolynomial operator-() const;
  AffinePolynomial& operator+=(const AffinePolynomial& other);
  AffinePolynomial& operator-=(const AffinePolynomial& other);
  AffinePolynomial& operator*=(const Polynomial& p);
  AffinePolynomial& operator*=(double s);

 private:
  void Prune();

  Polynomial constant_;
  std::map<int, Polynomial> linear_;
};

AffinePolynomial operator+(AffinePolynomial a, const AffinePolynomial& b);
AffinePolynomial operator-(AffinePolynomial a, const AffinePolynomial& b);
AffinePolynomial operator*(AffinePolynomial a, const Polynomial& p);
AffinePolynomial operator*(const Polynomial& p, AffinePolynomial a);
AffinePolynomial operator*(double s, AffinePolynomial a);

/// A polynomial decision variable sum_k theta_{ids[k]} basis[k].
struct PolyTemplate {
  std::vector<Monomial> basis;
  std::vector<int> ids;

  AffinePolynomial AsAffine() const;
  Polynomial Evaluate(const std::vector<double>& values) const;
};

class DegreeOverflow : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ResidualTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The Gram parameterization p = z^T Q z of a degree-`degree` polynomial.
struct GramParameterization {
  std::vector<Monomial> basis;
  /// Monomial -> list of (a, b) basis index pairs with a <= b and
  /// z_a z_b = monomial; coefficient(m) = sum Q_ab (a == b) + 2 Q_ab (a < b).
  std::map<Monomial, std::vector<std::pair<int, int>>> coefficient_map;
};

/// Basis: degrees 0..degree/2, or exactly degree/2 when homogeneous.
GramParameterization GramParameterize(int degree, int nvars, bool homogeneous);

struct SosConstraint {
  std::string name;
  AffinePolynomial expression;
  SemialgebraicSet domain;
  int degree = 0;
};

/// Multiplier SOS degree for each g_i: the largest even integer <= degree - d_i
/// (negative means the constraint gets no multiplier).
std::vector<int> PutinarAllocate(const SosConstraint& c);

/// Minimize a linear objective over scalar decision variables subject to SOS
/// constraints.
class SosProgram {
 public:
  explicit SosProgram(int nvars) : nvars_(nvars) {}

  int nvars() const { return nvars_; }
  int num_variables() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& variable_names() const { return names_; }
  const std::vector<SosConstraint>& constraints() const { return constraints_; }
  const std::vector<std::pair<int, double>>& objective() const { return objective_; }

  int NewScalar(const std::string& name);
  PolyTemplate NewPolynomial(const std::string& name, const std::vector<Monomial>& basis);

  /// expression in Sigma_{degree}[domain]. Throws DegreeOverflow if the
  /// expression's degree exceeds `degree`.
  int AddSosConstraint(const std::string& name, const AffinePolynomial& expression,
                       const SemialgebraicSet& domain, int degree);
  void AddSosConstraint(const std::string& name, const AffinePolynomial& expression, int degree) {
    AddSosConstraint(name, expression, SemialgebraicSet(nvars_), degree);
  }

  void SetObjective(std::vector<std::pair<int, double>> minimize) { objective_ = std::move(minimize); }

 private:
  int nvars_;
  std::vector<std::string> names_;
  std::vector<SosConstraint> constraints_;
  std::vector<std::pair<int, double>> objective_;
};

/// Gram block bookkeeping for one SOS term of one constraint.
struct GramBlockInfo {
  int block = -1;
  std::vector<Monomial> basis;
  /// Index of the domain constraint multiplied by this term; -1 for s_0.
  int multiplier_of = -1;
};

struct CompiledConstraint {
  GramBlockInfo s0;
  std::vector<GramBlockInfo> multipliers;
};

/// SDP plus what is needed to map its solution back.
struct CompiledProgram {
  SdpProblem sdp;
  std::vector<CompiledConstraint> constraints;
  /// theta = theta0 + null_basis * (SDP free variables).
  Eigen::VectorXd theta0;
  Eigen::MatrixXd null_basis;
  /// Set when the Gram-free coefficient equations are inconsistent.
  bool trivially_infeasible = false;
  double trivial_residual = 0.0;
  std::string message;
};

CompiledProgram Compile(const SosProgram& program);

struct GramCertificate {
  std::vector<Monomial> basis;
  Eigen::MatrixXd gram;
  Polynomial polynomial;
  /// -1 for s_0, else the index of g_i.
  int multiplier_of = -1;
  double min_eigenvalue = 0.0;
};

struct ConstraintCertificate {
  std::string name;
  Polynomial expression;
  SemialgebraicSet domain;
  GramCertificate s0;
  std::vector<GramCertificate> multipliers;
  double residual = 0.0;  // max |coeff(expression - s0 - sum s_i g_i)|
  double scale = 1.0;     // max(1, max |coeff of expression|)
};

struct SosSolution {
  std::vector<double> values;
  std::vector<ConstraintCertificate> certificates;
  double objective = 0.0;
  double max_relative_residual = 0.0;
};

/// Reconstructs decision values and certificates. Gram matrices with slightly
/// negative eigenvalues (>= -1e-6 scale) are projected onto the PSD cone before
/// the identity residual is measured. Throws ResidualTooLarge when the
/// residual exceeds 1e-6 scale or a Gram matrix is clearly indefinite.
SosSolution Extract(const SosProgram& program, const CompiledProgram& compiled, const SdpSolution& sdp);

enum class SosStatus { kFeasible, kMarginal, kInfeasible, kUnbounded, kNumericalTrouble };
std::string ToString(SosStatus status);

enum class SosMode { kOptimize, kFeasibility };

struct SosSolveOptions {
  SosMode mode = SosMode::kOptimize;
  FeasibilityOptions feasibility;
};

struct SosResult {
  SosStatus status = SosStatus::kNumericalTrouble;
  /// Feasibility margin (feasibility mode only).
  double tau = 0.0;
  bool has_solution = false;
  SosSolution solution;
  SdpSolution sdp;
  int sdp_iterations = 0;
  std::string message;
};

SosResult SolveSos(const SosProgram& program, const SosSolveOptions& options = {});

/// Certificate document: bases as exponent tuples, Gram matrices row-major,
/// decision values and residuals.
nlohmann::json CertificateToJson(const SosProgram& program, const SosSolution& solution);

/// Sampled check of expression - s0 - sum s_i g_i and nonnegativity of s0, s_i
/// at uniform points in the box [-half_width, half_width]^n.
struct SoundnessReport {
  double max_identity_error = 0.0;  // divided by scale; passes at 1e-5
  double min_sos_value = 0.0;       // divided by scale; passes at -1e-6
  bool passed = true;
};
SoundnessReport SampleSoundness(const ConstraintCertificate& cert, int samples, double half_width,
                                unsigned long long seed);

}  // namespace ratecert
