#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ratecert/beta.h"
#include "ratecert/polynomial.h"
#include "ratecert/signed_power.h"
#include "ratecert/sos.h"

namespace ratecert {

/// Which Lyapunov conditions are compiled.
enum class Condition {
  kExponential,
  /// Rational, linear conditions with fixed gain (the classical test).
  kRationalI,
  /// Rational, V (x^T x)^{p/2} decrease condition with free gain.
  kRationalII,
  kFiniteTime,
};

std::string ToString(Condition c);
/// Accepts "exponential", "rational_i", "rational_ii", "finite_time".
Condition ConditionFromString(const std::string& name);

class UnsupportedExponent : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InfeasibleAtKLo : public std::runtime_error {
 public:
  InfeasibleAtKLo(double k_lo, const std::string& status);
  double k_lo() const { return k_lo_; }

 private:
  double k_lo_;
};

/// Solver breakdown during a search; carries the bracket at the time.
class NumericalTroubleError : public std::runtime_error {
 public:
  NumericalTroubleError(const std::string& message, double lo, double hi);
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

struct BisectionOptions {
  double k_lo = 0.0;
  /// Zero selects doubling from k_lo + 1 until infeasible.
  double k_hi = 0.0;
  double rel_tol = 1e-3;
  int max_doublings = 20;
};

struct AnalysisSpec {
  Condition condition = Condition::kExponential;
  /// Vector field; must be polynomial except for finite-time analysis.
  std::vector<SignedPowerExpr> field;
  SemialgebraicSet domain;
  int d = 1;
  /// Rational: sandwich exponent (even). Finite-time: substitution exponent.
  int r = 2;
  /// Rational decay exponent (even).
  int p = 2;
  /// Finite-time measure power.
  Rational eta{1, 2};
  /// Finite-time multiplier h(z) = prod |z_i|^lambda_i; empty means h = 1.
  std::vector<int> h_exponents;
  /// Positive value fixes the gain M (required for kRationalI).
  double fixed_gain = 0.0;
  BisectionOptions bisection;
  /// State scaling x = s y used to condition local problems; zero picks s
  /// from a ball-like domain constraint (1 for global problems).
  double state_scale = 0.0;
  SosSolveOptions solver;

  int nvars() const { return domain.nvars; }
  /// Throws std::invalid_argument (or UnsupportedExponent) on bad input.
  void Validate() const;
};

/// Field, domain and auxiliary polynomials in the coordinates the SOS program
/// is posed in: y = x / s for exponential and rational analysis, z with
/// x = sign(z)|z|^r for finite-time analysis.
struct WorkingSystem {
  PolyVectorField field;  // h * f_r for finite-time
  SemialgebraicSet domain;
  double scale = 1.0;
  /// h(z) (z^T z)^{(2-eta) r / 2} for finite-time analysis.
  Polynomial rate_term;
  bool global = true;
};

WorkingSystem PrepareSystem(const AnalysisSpec& spec);

struct BuiltProgram {
  SosProgram program{1};
  /// V (or W = gamma V for finite-time) in working coordinates.
  PolyTemplate V;
  /// Decision index of gamma, or -1 when the gain is fixed.
  int gamma = -1;
  double gamma_fixed = 0.0;
  WorkingSystem system;
  /// The rate as it appears in the working-coordinate program.
  double working_k = 0.0;
};

BuiltProgram BuildExponential(const AnalysisSpec& spec, double k);
BuiltProgram BuildRationalII(const AnalysisSpec& spec, double k);
/// Gain fixed at spec.fixed_gain.
BuiltProgram BuildRationalI(const AnalysisSpec& spec, double k);
BuiltProgram BuildFiniteTime(const AnalysisSpec& spec, double k);
/// Dispatches on spec.condition.
BuiltProgram BuildProgram(const AnalysisSpec& spec, double k);

/// Gain from gamma for each condition: gamma^{1/2d}, gamma^{p/r}, gamma^{eta/2}.
double GainFromGamma(const AnalysisSpec& spec, double gamma);
double GammaFromGain(const AnalysisSpec& spec, double gain);

/// The beta family and alpha measure a certificate speaks about.
BetaFamily FamilyOf(const AnalysisSpec& spec);
AlphaMeasure AlphaOf(const AnalysisSpec& spec);

struct StabilityCertificate {
  Condition condition = Condition::kExponential;
  BetaFamily family;
  double k = 0.0;
  double gain = 0.0;
  double gamma = 0.0;
  /// Lyapunov function in original coordinates (z for finite-time), with the
  /// sandwich normalization of the conditions (V >= |x|^{2d}, etc.).
  Polynomial V;
  /// Same function in working coordinates, and the scale relating them.
  Polynomial working_V;
  double state_scale = 1.0;
  SemialgebraicSet working_domain;
  SosStatus status = SosStatus::kNumericalTrouble;
  double tau = 0.0;
  double max_relative_residual = 0.0;
  SosSolution solution;
  std::string derivation;

  /// V evaluated at an original-coordinate point (applies z = sign(x)|x|^{1/r}
  /// for finite-time certificates).
  double EvaluateV(const Eigen::VectorXd& x) const;
  int finite_time_r = 1;

  nlohmann::json ToJson(const BuiltProgram& built) const;
};

/// One solve at fixed k; feasibility mode unless `optimize_gain`.
struct SolveOutcome {
  SosStatus status = SosStatus::kNumericalTrouble;
  double tau = 0.0;
  std::string message;
  bool has_certificate = false;
  StabilityCertificate certificate;
};

SolveOutcome SolveAtRate(const AnalysisSpec& spec, double k, bool optimize_gain = false);

struct BisectionStep {
  double k = 0.0;
  SosStatus status = SosStatus::kNumericalTrouble;
  double tau = 0.0;
};

struct RateResult {
  double k_star = 0.0;
  /// Smallest k found infeasible (or the top of the bracket).
  double k_infeasible = 0.0;
  StabilityCertificate certificate;
  std::vector<BisectionStep> history;
};

/// Largest feasible k in the bracket to relative tolerance. Marginal outcomes
/// count as infeasible. Throws InfeasibleAtKLo or NumericalTroubleError.
RateResult BisectRate(const AnalysisSpec& spec);

struct GainResult {
  double gain = 0.0;
  StabilityCertificate certificate;
  /// True when the gain came from bisection on a fixed gain because the
  /// optimization solve failed.
  bool used_gain_bisection = false;
};

/// Least gain certified at rate k. Throws std::runtime_error when k is
/// infeasible.
GainResult MinimizeGain(const AnalysisSpec& spec, double k);

/// Parameter transforms between the three rational Lyapunov conditions:
///   (i)   C1 |x|^r <= V <= C2 |x|^r,  V' <= -C3 |x|^q
///   (ii)  |x|^r / gamma <= V <= |x|^r, V' <= -c V |x|^p
///   (iii) |x|^p / M <= V <= |x|^p,     V' <= -k V^2
struct RationalParams {
  double C1 = 0, C2 = 0, C3 = 0;
  double r = 0, q = 0, p = 0;
  double gamma = 0, c = 0;
  double M = 0, k = 0;
};
/// Applies statement `mapping` (1..6) of the equivalence between the
/// conditions; reads the source condition's fields and fills the target's.
RationalParams MapConditions(int mapping, const RationalParams& in);

struct SoundnessCheck {
  bool passed = true;
  /// Most negative value of each inequality relative to its scale:
  /// lower sandwich, upper sandwich, derivative condition.
  std::array<double, 3> worst{0.0, 0.0, 0.0};
  int samples = 0;
};

/// Evaluates the three certified inequalities at random points of the working
/// domain (box [-1, 1]^n for global problems) with slack 1e-5 scale.
SoundnessCheck CheckCertificate(const StabilityCertificate& cert, int samples, unsigned long long seed);

/// Radius of a ball around the origin containing the domain, from ray scans;
/// +inf for global or unbounded domains.
double DomainRadius(const SemialgebraicSet& domain);

}  // namespace ratecert
