#include "ratecert/stability.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include <fmt/format.h>

namespace ratecert {

namespace {

bool IsFeasible(SosStatus s) { return s == SosStatus::kFeasible; }

double SafePow(double base, double exponent) { return std::pow(base, exponent); }

// Radius of {c0 + x^T Q x >= 0} when g has that form with Q negative definite.
std::optional<double> BallRadius(const Polynomial& g) {
  if (g.degree() != 2) return std::nullopt;
  const int n = g.nvars();
  double c0 = 0.0;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [m, c] : g.terms()) {
    if (m.degree() == 1) return std::nullopt;
    if (m.degree() == 0) {
      c0 = c;
      continue;
    }
    std::vector<int> idx;
    for (int i = 0; i < n; ++i) {
      for (int e = 0; e < m[i]; ++e) idx.push_back(i);
    }
    if (idx[0] == idx[1]) {
      Q(idx[0], idx[0]) += c;
    } else {
      Q(idx[0], idx[1]) += 0.5 * c;
      Q(idx[1], idx[0]) += 0.5 * c;
    }
  }
  if (c0 <= 0.0) return std::nullopt;
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(-Q).eigenvalues().minCoeff();
  if (lmin <= 0.0) return std::nullopt;
  return std::sqrt(c0 / lmin);
}

double AutoScale(const SemialgebraicSet& domain) {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& g : domain.constraints) {
    if (auto r = BallRadius(g)) s = std::min(s, *r);
  }
  return std::isfinite(s) ? s : 1.0;
}

Polynomial Normalized(const Polynomial& p) {
  const double m = p.max_abs_coefficient();
  return m > 0.0 ? p * (1.0 / m) : p;
}

// Homogeneous-by-degree template basis in `n` variables.
std::vector<Monomial> TemplateBasis(int n, int lo, int hi) { return MonomialBasis(n, lo, hi); }

// |x|^r sandwich term as a polynomial; r even.
Polynomial NormPower(int n, int r) { return Polynomial::SquaredNormPower(n, r / 2); }

std::string DomainSuffix(const SemialgebraicSet& domain) { return domain.is_global() ? "" : "[Omega]"; }

void AddSandwich(BuiltProgram& b, const AffinePolynomial& V, const Polynomial& norm, int degree) {
  const int n = b.system.field.nvars;
  const SemialgebraicSet& dom = b.system.domain;
  b.program.AddSosConstraint("lower_sandwich", V - AffinePolynomial(norm), dom, degree);
  AffinePolynomial gamma_norm = b.gamma >= 0 ? AffinePolynomial::Variable(n, b.gamma, norm)
                                             : AffinePolynomial(b.gamma_fixed * norm);
  b.program.AddSosConstraint("upper_sandwich", gamma_norm - V, dom, degree);
}

void SetGamma(const AnalysisSpec& spec, BuiltProgram& b) {
  if (spec.fixed_gain > 0.0) {
    b.gamma = -1;
    b.gamma_fixed = GammaFromGain(spec, spec.fixed_gain);
  } else {
    b.gamma = b.program.NewScalar("gamma");
    b.program.SetObjective({{b.gamma, 1.0}});
  }
}

}  // namespace

std::string ToString(Condition c) {
  switch (c) {
    case Condition::kExponential:
      return "exponential";
    case Condition::kRationalI:
      return "rational_i";
    case Condition::kRationalII:
      return "rational_ii";
    case Condition::kFiniteTime:
      return "finite_time";
  }
  return "unknown";
}

Condition ConditionFromString(const std::string& name) {
  for (Condition c : {Condition::kExponential, Condition::kRationalI, Condition::kRationalII,
                      Condition::kFiniteTime}) {
    if (ToString(c) == name) return c;
  }
  throw std::invalid_argument(fmt::format("unknown condition '{}'", name));
}

InfeasibleAtKLo::InfeasibleAtKLo(double k_lo, const std::string& status)
    : std::runtime_error(fmt::format("conditions are not certifiable at k_lo = {} ({})", k_lo, status)),
      k_lo_(k_lo) {}

NumericalTroubleError::NumericalTroubleError(const std::string& message, double lo, double hi)
    : std::runtime_error(fmt::format("{} (bracket [{}, {}])", message, lo, hi)), lo_(lo), hi_(hi) {}

void AnalysisSpec::Validate() const {
  const int n = nvars();
  if (n < 1) throw std::invalid_argument("the system needs at least one state");
  if (static_cast<int>(field.size()) != n) {
    throw std::invalid_argument(fmt::format("field has {} components for {} states", field.size(), n));
  }
  for (const auto& g : domain.constraints) {
    if (g.nvars() != n) throw std::invalid_argument("domain constraint has the wrong number of variables");
  }
  if (d < 1) throw std::invalid_argument("degree parameter d must be positive");
  if (bisection.k_lo < 0.0) throw std::invalid_argument("k_lo must be nonnegative");
  if (bisection.k_hi != 0.0 && bisection.k_hi <= bisection.k_lo) {
    throw std::invalid_argument("k_hi must exceed k_lo");
  }
  if (!(bisection.rel_tol > 0.0)) throw std::invalid_argument("relative tolerance must be positive");
  if (fixed_gain < 0.0 || (fixed_gain > 0.0 && fixed_gain < 1.0)) {
    throw std::invalid_argument("a fixed gain must be at least 1");
  }
  if (condition != Condition::kFiniteTime) {
    for (const auto& fi : field) {
      if (!fi.IsPolynomial()) throw std::invalid_argument("field must be polynomial for this condition");
    }
  }
  if (condition == Condition::kRationalI || condition == Condition::kRationalII) {
    if (r < 2 || r % 2 != 0) throw UnsupportedExponent(fmt::format("sandwich exponent r = {} must be even", r));
    if (p < 2 || p % 2 != 0) throw UnsupportedExponent(fmt::format("decay exponent p = {} must be even", p));
    if (r != 2 * d) throw std::invalid_argument(fmt::format("rational analysis needs r = 2d (r = {}, d = {})", r, d));
  }
  if (condition == Condition::kRationalI && fixed_gain <= 0.0) {
    throw std::invalid_argument("the fixed-gain rational condition needs a gain");
  }
  if (condition == Condition::kFiniteTime) {
    if (r < 1) throw UnsupportedExponent("substitution exponent r must be a positive integer");
    if (!(eta > Rational(0)) || !(eta < Rational(1))) throw std::invalid_argument("eta must lie in (0, 1)");
    if (d < r) throw std::invalid_argument("finite-time analysis needs d >= r");
    if (!h_exponents.empty() && static_cast<int>(h_exponents.size()) != n) {
      throw std::invalid_argument("multiplier exponents must list one entry per state");
    }
  }
}

WorkingSystem PrepareSystem(const AnalysisSpec& spec) {
  const int n = spec.nvars();
  WorkingSystem w;
  w.global = spec.domain.is_global();
  if (spec.condition == Condition::kFiniteTime) {
    const Rational r(spec.r);
    const std::vector<int> lambda = spec.h_exponents.empty() ? std::vector<int>(static_cast<std::size_t>(n), 0)
                                                             : spec.h_exponents;
    const SignedPowerExpr h = MonomialMultiplier(n, lambda);
    const auto f_r = SubstituteSignedPower(spec.field, r);
    std::vector<Polynomial> comps;
    for (const auto& fi : f_r) comps.push_back(ToPolynomial(fi, h));
    w.field = PolyVectorField(std::move(comps));
    const Rational power = (Rational(2) - spec.eta) * r / Rational(2);
    w.rate_term = ToPolynomial(h * SignedPowerExpr::SquaredNormPower(n, power));
    w.domain = SemialgebraicSet(n);
    for (const auto& g : spec.domain.constraints) {
      try {
        w.domain.constraints.push_back(Normalized(ToPolynomial(SubstituteScalar(SignedPowerExpr(g), r))));
      } catch (const NotPolynomial& e) {
        throw std::invalid_argument(fmt::format("domain not transformable: {}", e.what()));
      }
    }
    w.scale = 1.0;
    return w;
  }
  const double s = spec.state_scale > 0.0 ? spec.state_scale : (w.global ? 1.0 : AutoScale(spec.domain));
  w.scale = s;
  std::vector<Polynomial> comps;
  for (const auto& fi : spec.field) comps.push_back(ToPolynomial(fi).ScaleArguments(s) * (1.0 / s));
  w.field = PolyVectorField(std::move(comps));
  w.domain = SemialgebraicSet(n);
  for (const auto& g : spec.domain.constraints) w.domain.constraints.push_back(Normalized(g.ScaleArguments(s)));
  return w;
}

BuiltProgram BuildExponential(const AnalysisSpec& spec, double k) {
  spec.Validate();
  BuiltProgram b;
  b.system = PrepareSystem(spec);
  const int n = spec.nvars();
  const int d = spec.d;
  b.program = SosProgram(n);
  b.working_k = k;
  b.V = b.program.NewPolynomial("V", TemplateBasis(n, 2 * d, 2 * d));
  SetGamma(spec, b);
  const AffinePolynomial V = b.V.AsAffine();
  AddSandwich(b, V, NormPower(n, 2 * d), 2 * d);
  const AffinePolynomial decrease = (-2.0 * d * k) * V - V.LieDerivative(b.system.field);
  const int dprime = std::max(2 * d, 2 * d - 1 + b.system.field.degree());
  b.program.AddSosConstraint("decrease", decrease, b.system.domain, dprime);
  return b;
}

namespace {

BuiltProgram BuildRational(const AnalysisSpec& spec, double k, bool fixed) {
  spec.Validate();
  BuiltProgram b;
  b.system = PrepareSystem(spec);
  const int n = spec.nvars();
  const int r = spec.r;
  const int p = spec.p;
  b.program = SosProgram(n);
  b.working_k = k * SafePow(b.system.scale, p);
  b.V = b.program.NewPolynomial("V", TemplateBasis(n, r, r));
  SetGamma(spec, b);
  const AffinePolynomial V = b.V.AsAffine();
  AddSandwich(b, V, NormPower(n, r), r);
  const int dprime = std::max(r + p, r - 1 + b.system.field.degree());
  const double ratio = static_cast<double>(r) / p;
  AffinePolynomial decrease = -V.LieDerivative(b.system.field);
  if (fixed) {
    decrease -= AffinePolynomial((ratio * b.gamma_fixed * b.working_k) * NormPower(n, r + p));
  } else {
    decrease -= (ratio * b.working_k) * (V * NormPower(n, p));
  }
  b.program.AddSosConstraint("decrease", decrease, b.system.domain, dprime);
  return b;
}

}  // namespace

BuiltProgram BuildRationalII(const AnalysisSpec& spec, double k) { return BuildRational(spec, k, false); }

BuiltProgram BuildRationalI(const AnalysisSpec& spec, double k) {
  if (spec.fixed_gain <= 0.0) throw std::invalid_argument("the fixed-gain rational condition needs a gain");
  return BuildRational(spec, k, true);
}

BuiltProgram BuildFiniteTime(const AnalysisSpec& spec, double k) {
  spec.Validate();
  BuiltProgram b;
  b.system = PrepareSystem(spec);
  const int n = spec.nvars();
  const int d = spec.d;
  const int r = spec.r;
  b.program = SosProgram(n);
  b.working_k = k;
  b.V = b.program.NewPolynomial("W", TemplateBasis(n, 2 * r, 2 * d));
  SetGamma(spec, b);
  const AffinePolynomial W = b.V.AsAffine();
  AddSandwich(b, W, NormPower(n, 2 * r), 2 * d);
  const double c = 2.0 * k / ToDouble(spec.eta);
  AffinePolynomial decrease = -W.LieDerivative(b.system.field);
  if (b.gamma >= 0) {
    decrease -= AffinePolynomial::Variable(n, b.gamma, c * b.system.rate_term);
  } else {
    decrease -= AffinePolynomial((c * b.gamma_fixed) * b.system.rate_term);
  }
  const int dprime = std::max(b.system.rate_term.degree(), 2 * d - 1 + b.system.field.degree());
  b.program.AddSosConstraint("decrease", decrease, b.system.domain, dprime);
  return b;
}

BuiltProgram BuildProgram(const AnalysisSpec& spec, double k) {
  switch (spec.condition) {
    case Condition::kExponential:
      return BuildExponential(spec, k);
    case Condition::kRationalI:
      return BuildRationalI(spec, k);
    case Condition::kRationalII:
      return BuildRationalII(spec, k);
    case Condition::kFiniteTime:
      return BuildFiniteTime(spec, k);
  }
  throw std::invalid_argument("unknown condition");
}

double GainFromGamma(const AnalysisSpec& spec, double gamma) {
  switch (spec.condition) {
    case Condition::kExponential:
      return SafePow(gamma, 1.0 / (2.0 * spec.d));
    case Condition::kRationalI:
    case Condition::kRationalII:
      return SafePow(gamma, static_cast<double>(spec.p) / spec.r);
    case Condition::kFiniteTime:
      return SafePow(gamma, ToDouble(spec.eta) / 2.0);
  }
  return gamma;
}

double GammaFromGain(const AnalysisSpec& spec, double gain) {
  switch (spec.condition) {
    case Condition::kExponential:
      return SafePow(gain, 2.0 * spec.d);
    case Condition::kRationalI:
    case Condition::kRationalII:
      return SafePow(gain, static_cast<double>(spec.r) / spec.p);
    case Condition::kFiniteTime:
      return SafePow(gain, 2.0 / ToDouble(spec.eta));
  }
  return gain;
}

BetaFamily FamilyOf(const AnalysisSpec& spec) {
  switch (spec.condition) {
    case Condition::kExponential:
      return BetaFamily::Exponential();
    case Condition::kRationalI:
    case Condition::kRationalII:
      return BetaFamily::RationalFamily(spec.p);
    case Condition::kFiniteTime:
      return BetaFamily::FiniteTime(2.0 / spec.r, ToDouble(spec.eta));
  }
  return BetaFamily::Exponential();
}

AlphaMeasure AlphaOf(const AnalysisSpec& spec) { return AlphaMeasure::ForFamily(FamilyOf(spec)); }

double StabilityCertificate::EvaluateV(const Eigen::VectorXd& x) const {
  if (condition != Condition::kFiniteTime) return V.Evaluate(x);
  Eigen::VectorXd z(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    z[i] = (x[i] < 0 ? -1.0 : 1.0) * std::pow(std::abs(x[i]), 1.0 / finite_time_r);
  }
  return V.Evaluate(z);
}

nlohmann::json StabilityCertificate::ToJson(const BuiltProgram& built) const {
  nlohmann::json doc;
  const auto names = DefaultVariableNames(V.nvars());
  doc["condition"] = ToString(condition);
  doc["family"] = ToString(family.kind);
  doc["k"] = k;
  doc["gain"] = gain;
  doc["gamma"] = gamma;
  doc["V"] = V.ToString(condition == Condition::kFiniteTime ? std::vector<std::string>{} : names);
  if (condition == Condition::kFiniteTime) {
    std::vector<std::string> z;
    for (int i = 1; i <= V.nvars(); ++i) z.push_back(fmt::format("z{}", i));
    doc["V"] = V.ToString(z);
    doc["V_variables"] = z;
    doc["substitution"] = fmt::format("x = sign(z) |z|^{}", finite_time_r);
  }
  doc["working_V"] = working_V.ToString();
  doc["state_scale"] = state_scale;
  std::vector<std::string> dom;
  for (const auto& g : working_domain.constraints) dom.push_back(g.ToString());
  doc["working_domain"] = dom;
  doc["status"] = ToString(status);
  doc["tau"] = tau;
  doc["max_relative_residual"] = max_relative_residual;
  doc["derivation"] = derivation;
  doc["sos"] = CertificateToJson(built.program, solution);
  return doc;
}

namespace {

std::string Derivation(const AnalysisSpec& spec, const BuiltProgram& b) {
  std::string out;
  for (const auto& c : b.program.constraints()) {
    out += fmt::format("{} in Sigma_{}{}; ", c.name, c.degree, DomainSuffix(c.domain));
  }
  switch (spec.condition) {
    case Condition::kExponential:
      out += fmt::format("M = gamma^(1/{})", 2 * spec.d);
      break;
    case Condition::kRationalI:
    case Condition::kRationalII:
      out += fmt::format("M = gamma^({}/{})", spec.p, spec.r);
      if (b.system.scale != 1.0) out += fmt::format("; k = k_y / s^{}", spec.p);
      break;
    case Condition::kFiniteTime:
      out += fmt::format("M = gamma^({}/2); V = W / gamma in z with x = sign(z)|z|^{}", ToString(spec.eta), spec.r);
      break;
  }
  if (b.system.scale != 1.0) out += fmt::format("; x = {} y", b.system.scale);
  return out;
}

StabilityCertificate MakeCertificate(const AnalysisSpec& spec, const BuiltProgram& b, double k,
                                     const SosResult& res) {
  StabilityCertificate c;
  c.condition = spec.condition;
  c.family = FamilyOf(spec);
  c.k = k;
  c.status = res.status;
  c.tau = res.tau;
  c.solution = res.solution;
  c.max_relative_residual = res.solution.max_relative_residual;
  c.gamma = b.gamma >= 0 ? res.solution.values[static_cast<std::size_t>(b.gamma)] : b.gamma_fixed;
  c.gain = GainFromGamma(spec, c.gamma);
  c.state_scale = b.system.scale;
  c.working_domain = b.system.domain;
  c.working_V = b.V.Evaluate(res.solution.values);
  const double s = b.system.scale;
  switch (spec.condition) {
    case Condition::kExponential:
      c.V = c.working_V.ScaleArguments(1.0 / s) * SafePow(s, 2.0 * spec.d);
      break;
    case Condition::kRationalI:
    case Condition::kRationalII:
      c.V = c.working_V.ScaleArguments(1.0 / s) * SafePow(s, spec.r);
      break;
    case Condition::kFiniteTime:
      c.V = c.working_V * (1.0 / c.gamma);
      c.finite_time_r = spec.r;
      break;
  }
  c.derivation = Derivation(spec, b);
  return c;
}

SosSolveOptions WithMode(const AnalysisSpec& spec, SosMode mode) {
  SosSolveOptions o = spec.solver;
  o.mode = mode;
  return o;
}

}  // namespace

SolveOutcome SolveAtRate(const AnalysisSpec& spec, double k, bool optimize_gain) {
  const BuiltProgram b = BuildProgram(spec, k);
  const SosResult res = SolveSos(b.program, WithMode(spec, optimize_gain ? SosMode::kOptimize : SosMode::kFeasibility));
  SolveOutcome out;
  out.status = res.status;
  out.tau = res.tau;
  out.message = res.message;
  if (res.status == SosStatus::kFeasible && res.has_solution) {
    out.has_certificate = true;
    out.certificate = MakeCertificate(spec, b, k, res);
  }
  return out;
}

RateResult BisectRate(const AnalysisSpec& spec) {
  spec.Validate();
  RateResult result;
  double lo = spec.bisection.k_lo;
  double hi = spec.bisection.k_hi;

  auto probe = [&](double k) {
    SolveOutcome o = SolveAtRate(spec, k);
    result.history.push_back({k, o.status, o.tau});
    if (o.status == SosStatus::kNumericalTrouble || o.status == SosStatus::kUnbounded ||
        (o.status == SosStatus::kFeasible && !o.has_certificate)) {
      throw NumericalTroubleError(fmt::format("solver trouble at k = {}: {}", k, o.message), lo, hi);
    }
    return o;
  };

  SolveOutcome at_lo = probe(lo);
  if (!IsFeasible(at_lo.status)) throw InfeasibleAtKLo(lo, ToString(at_lo.status));
  result.certificate = at_lo.certificate;

  if (hi > 0.0) {
    SolveOutcome at_hi = probe(hi);
    if (IsFeasible(at_hi.status)) {
      result.k_star = hi;
      result.k_infeasible = hi;
      result.certificate = at_hi.certificate;
      return result;
    }
  } else {
    double step = 1.0;
    hi = lo + step;
    int doublings = 0;
    while (true) {
      SolveOutcome o = probe(hi);
      if (!IsFeasible(o.status)) break;
      lo = hi;
      result.certificate = o.certificate;
      if (++doublings > spec.bisection.max_doublings) {
        throw NumericalTroubleError("no infeasible rate found while expanding the bracket", lo, hi);
      }
      step *= 2.0;
      hi = lo + step;
    }
  }

  while (hi - lo > spec.bisection.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    SolveOutcome o = probe(mid);
    if (IsFeasible(o.status)) {
      lo = mid;
      result.certificate = o.certificate;
    } else {
      hi = mid;
    }
  }
  result.k_star = lo;
  result.k_infeasible = hi;
  return result;
}

GainResult MinimizeGain(const AnalysisSpec& spec, double k) {
  spec.Validate();
  GainResult out;
  if (spec.fixed_gain > 0.0) {
    SolveOutcome o = SolveAtRate(spec, k);
    if (!o.has_certificate) throw std::runtime_error(fmt::format("rate {} is not certifiable at the fixed gain", k));
    out.gain = spec.fixed_gain;
    out.certificate = o.certificate;
    return out;
  }
  SolveOutcome opt = SolveAtRate(spec, k, true);
  if (opt.has_certificate) {
    out.gain = opt.certificate.gain;
    out.certificate = opt.certificate;
    return out;
  }
  // Geometric bisection on a fixed gain, which the sandwich bounds below by 1.
  // Only a converged infeasibility verdict raises the lower end; loose gains
  // are badly scaled and often end in numerical trouble, so an inconclusive
  // solve moves the search toward tighter gains.
  SolveOutcome feas = SolveAtRate(spec, k);
  if (!feas.has_certificate) {
    throw std::runtime_error(fmt::format("rate {} is not certifiable ({})", k, ToString(feas.status)));
  }
  out.used_gain_bisection = true;
  out.certificate = feas.certificate;
  double hi = std::max(1.0, feas.certificate.gain);
  double lo = 1.0;
  AnalysisSpec fixed = spec;
  while (hi - lo > 1e-4 * hi) {
    const double mid = std::sqrt(lo * hi);
    fixed.fixed_gain = mid;
    SolveOutcome o = SolveAtRate(fixed, k);
    if (o.has_certificate) {
      if (o.certificate.gain < out.certificate.gain) out.certificate = o.certificate;
      hi = mid;
    } else if (o.status == SosStatus::kInfeasible) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.certificate.condition = spec.condition;
  out.gain = out.certificate.gain;
  return out;
}

RationalParams MapConditions(int mapping, const RationalParams& in) {
  RationalParams out = in;
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(fmt::format("{} must be positive", name));
  };
  switch (mapping) {
    case 1:
      positive(in.C1, "C1");
      positive(in.C2, "C2");
      positive(in.C3, "C3");
      if (!(in.q > in.r)) throw std::invalid_argument("q must exceed r");
      out.p = in.q - in.r;
      out.gamma = in.C2 / in.C1;
      out.c = in.C3 / in.C2;
      break;
    case 2:
      positive(in.gamma, "gamma");
      positive(in.c, "c");
      out.C1 = 1.0 / in.gamma;
      out.C2 = 1.0;
      out.C3 = in.c / in.gamma;
      out.q = in.r + in.p;
      break;
    case 3:
      positive(in.gamma, "gamma");
      positive(in.r, "r");
      out.M = std::pow(in.gamma, in.p / in.r);
      out.k = in.c * in.p / in.r;
      break;
    case 4:
      positive(in.M, "M");
      out.r = in.p;
      out.gamma = in.M;
      out.c = in.k / in.M;
      break;
    case 5:
      positive(in.C1, "C1");
      positive(in.C2, "C2");
      positive(in.r, "r");
      if (!(in.q > in.r)) throw std::invalid_argument("q must exceed r");
      out.p = in.q - in.r;
      out.M = std::pow(in.C2 / in.C1, in.q / in.r - 1.0);
      out.k = (in.q / in.r - 1.0) * in.C3 / in.C2;
      break;
    case 6:
      positive(in.M, "M");
      out.C1 = 1.0 / in.M;
      out.C2 = 1.0;
      out.C3 = in.k / (in.M * in.M);
      out.r = in.p;
      out.q = 2.0 * in.p;
      break;
    default:
      throw std::invalid_argument(fmt::format("no mapping numbered {}", mapping));
  }
  return out;
}

double DomainRadius(const SemialgebraicSet& domain) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (domain.is_global()) return kInf;
  const int n = domain.nvars;
  std::vector<Eigen::VectorXd> dirs;
  if (n == 1) {
    dirs = {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -1.0)};
  } else if (n == 2) {
    for (int i = 0; i < 256; ++i) {
      const double a = 2.0 * std::numbers::pi * i / 256;
      Eigen::VectorXd u(2);
      u << std::cos(a), std::sin(a);
      dirs.push_back(u);
    }
  } else {
    std::mt19937_64 rng(0);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 1024; ++i) {
      Eigen::VectorXd u(n);
      for (int j = 0; j < n; ++j) u[j] = normal(rng);
      dirs.push_back(u.normalized());
    }
    for (int j = 0; j < n; ++j) {
      dirs.push_back(Eigen::VectorXd::Unit(n, j));
      dirs.push_back(-Eigen::VectorXd::Unit(n, j));
    }
  }
  double radius = 0.0;
  for (const auto& u : dirs) {
    double last = 0.0;
    for (double t = 1e-3; t <= 1e4; t *= 1.02) {
      if (domain.Contains(t * u)) last = t;
    }
    if (last >= 1e4 / 1.02) return kInf;
    radius = std::max(radius, last * 1.02);
  }
  return radius;
}

SoundnessCheck CheckCertificate(const StabilityCertificate& cert, int samples, unsigned long long seed) {
  SoundnessCheck out;
  const auto& certs = cert.solution.certificates;
  const SemialgebraicSet& dom = cert.working_domain;
  const int n = dom.nvars;
  double half = DomainRadius(dom);
  if (!std::isfinite(half)) half = 1.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-half, half);
  Eigen::VectorXd x(n);
  int attempts = 0;
  while (out.samples < samples && attempts < 100 * samples) {
    ++attempts;
    for (int i = 0; i < n; ++i) x[i] = uni(rng);
    if (!dom.Contains(x)) continue;
    ++out.samples;
    for (std::size_t c = 0; c < certs.size() && c < 3; ++c) {
      out.worst[c] = std::min(out.worst[c], certs[c].expression.Evaluate(x) / certs[c].scale);
    }
  }
  for (double w : out.worst) out.passed = out.passed && w >= -1e-5;
  return out;
}

}  // namespace ratecert
