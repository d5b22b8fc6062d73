#include "ratecert/sos.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

#include <fmt/format.h>

namespace ratecert {

// ---------------------------------------------------------------------------
// AffinePolynomial

AffinePolynomial AffinePolynomial::Variable(int nvars, int id, const Polynomial& coefficient) {
  AffinePolynomial a(nvars);
  if (!coefficient.is_zero()) a.linear_.emplace(id, coefficient);
  return a;
}

int AffinePolynomial::degree() const {
  int d = constant_.degree();
  for (const auto& [id, p] : linear_) d = std::max(d, p.degree());
  return d;
}

int AffinePolynomial::min_degree() const {
  int d = std::numeric_limits<int>::max();
  if (!constant_.is_zero()) d = constant_.min_degree();
  for (const auto& [id, p] : linear_) d = std::min(d, p.min_degree());
  return d == std::numeric_limits<int>::max() ? -1 : d;
}

bool AffinePolynomial::is_homogeneous() const {
  const int lo = min_degree();
  return lo < 0 || lo == degree();
}

Polynomial AffinePolynomial::Evaluate(const std::vector<double>& values) const {
  Polynomial out = constant_;
  for (const auto& [id, p] : linear_) {
    if (id < 0 || id >= static_cast<int>(values.size())) {
      throw std::out_of_range(fmt::format("decision variable {} has no value", id));
    }
    out += values[static_cast<std::size_t>(id)] * p;
  }
  return out;
}

AffinePolynomial AffinePolynomial::Derivative(int var) const {
  AffinePolynomial out(constant_.Derivative(var));
  for (const auto& [id, p] : linear_) out.linear_.emplace(id, p.Derivative(var));
  out.Prune();
  return out;
}

AffinePolynomial AffinePolynomial::LieDerivative(const PolyVectorField& f) const {
  if (f.nvars != nvars()) throw DimensionMismatch("vector field and polynomial differ in dimension");
  AffinePolynomial out(ratecert::LieDerivative(constant_, f));
  for (const auto& [id, p] : linear_) out.linear_.emplace(id, ratecert::LieDerivative(p, f));
  out.Prune();
  return out;
}

AffinePolynomial AffinePolynomial::operator-() const {
  AffinePolynomial out(-constant_);
  for (const auto& [id, p] : linear_) out.linear_.emplace(id, -p);
  return out;
}

AffinePolynomial& AffinePolynomial::operator+=(const AffinePolynomial& other) {
  constant_ += other.constant_;
  for (const auto& [id, p] : other.linear_) {
    auto [it, inserted] = linear_.emplace(id, p);
    if (!inserted) it->second += p;
  }
  Prune();
  return *this;
}

AffinePolynomial& AffinePolynomial::operator-=(const AffinePolynomial& other) { return *this += -other; }

AffinePolynomial& AffinePolynomial::operator*=(const Polynomial& q) {
  constant_ *= q;
  for (auto& [id, p] : linear_) p *= q;
  Prune();
  return *this;
}

AffinePolynomial& AffinePolynomial::operator*=(double s) {
  constant_ *= s;
  for (auto& [id, p] : linear_) p *= s;
  Prune();
  return *this;
}

void AffinePolynomial::Prune() {
  std::erase_if(linear_, [](const auto& kv) { return kv.second.is_zero(); });
}

AffinePolynomial operator+(AffinePolynomial a, const AffinePolynomial& b) { return a += b; }
AffinePolynomial operator-(AffinePolynomial a, const AffinePolynomial& b) { return a -= b; }
AffinePolynomial operator*(AffinePolynomial a, const Polynomial& p) { return a *= p; }
AffinePolynomial operator*(const Polynomial& p, AffinePolynomial a) { return a *= p; }
AffinePolynomial operator*(double s, AffinePolynomial a) { return a *= s; }

AffinePolynomial PolyTemplate::AsAffine() const {
  if (basis.empty()) return AffinePolynomial();
  const int n = basis.front().nvars();
  AffinePolynomial out(n);
  for (std::size_t k = 0; k < basis.size(); ++k) out += AffinePolynomial::Variable(n, ids[k], Polynomial(basis[k]));
  return out;
}

Polynomial PolyTemplate::Evaluate(const std::vector<double>& values) const {
  if (basis.empty()) return Polynomial();
  Polynomial out(basis.front().nvars());
  for (std::size_t k = 0; k < basis.size(); ++k) {
    out.AddTerm(basis[k], values.at(static_cast<std::size_t>(ids[k])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gram parameterization and multiplier allocation

namespace {

GramParameterization ParameterizeBasis(std::vector<Monomial> basis) {
  GramParameterization g;
  g.basis = std::move(basis);
  const int s = static_cast<int>(g.basis.size());
  for (int a = 0; a < s; ++a) {
    for (int b = a; b < s; ++b) g.coefficient_map[g.basis[a] * g.basis[b]].emplace_back(a, b);
  }
  return g;
}

int CeilHalf(int d) { return d <= 0 ? 0 : (d + 1) / 2; }

}  // namespace

GramParameterization GramParameterize(int degree, int nvars, bool homogeneous) {
  if (degree < 0) throw std::invalid_argument("negative Gram degree");
  const int half = degree / 2;
  return ParameterizeBasis(MonomialBasis(nvars, homogeneous ? half : 0, half));
}

std::vector<int> PutinarAllocate(const SosConstraint& c) {
  std::vector<int> out;
  for (const auto& g : c.domain.constraints) {
    int d = c.degree - g.degree();
    if (d % 2 != 0) --d;
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SosProgram

int SosProgram::NewScalar(const std::string& name) {
  names_.push_back(name);
  return static_cast<int>(names_.size()) - 1;
}

PolyTemplate SosProgram::NewPolynomial(const std::string& name, const std::vector<Monomial>& basis) {
  PolyTemplate t;
  t.basis = basis;
  for (const auto& m : basis) {
    if (m.nvars() != nvars_) throw DimensionMismatch("template monomial has the wrong number of variables");
    t.ids.push_back(NewScalar(fmt::format("{}[{}]", name, m.ToString())));
  }
  return t;
}

int SosProgram::AddSosConstraint(const std::string& name, const AffinePolynomial& expression,
                                 const SemialgebraicSet& domain, int degree) {
  if (expression.nvars() != nvars_ || domain.nvars != nvars_) {
    throw DimensionMismatch("SOS constraint '" + name + "' has the wrong number of variables");
  }
  if (expression.degree() > degree) {
    throw DegreeOverflow(fmt::format("SOS constraint '{}' has degree {} above the declared degree {}", name,
                                     expression.degree(), degree));
  }
  for (const auto& [id, p] : expression.linear()) {
    if (id < 0 || id >= num_variables()) {
      throw std::out_of_range(fmt::format("SOS constraint '{}' refers to unknown variable {}", name, id));
    }
  }
  constraints_.push_back({name, expression, domain, degree});
  return static_cast<int>(constraints_.size()) - 1;
}

// ---------------------------------------------------------------------------
// Compilation

namespace {

struct Row {
  std::vector<SdpEntry> entries;
  std::map<int, double> theta;  // coefficient of theta_v on the Gram side
  double rhs = 0.0;
};

void AddGramTerm(const GramParameterization& gram, int block, const Polynomial& factor,
                 std::map<Monomial, Row>* rows) {
  for (const auto& [m, pairs] : gram.coefficient_map) {
    for (const auto& [t, gt] : factor.terms()) {
      Row& row = (*rows)[m * t];
      for (const auto& [a, b] : pairs) row.entries.push_back({block, a, b, gt});
    }
  }
}

bool PositiveAtOrigin(const SemialgebraicSet& domain) {
  const std::vector<double> zero(static_cast<std::size_t>(domain.nvars), 0.0);
  return std::all_of(domain.constraints.begin(), domain.constraints.end(),
                     [&](const Polynomial& g) { return g.Evaluate(zero) > 0.0; });
}

}  // namespace

CompiledProgram Compile(const SosProgram& program) {
  CompiledProgram out;
  const int n = program.nvars();
  const int nv = program.num_variables();

  std::vector<std::map<Monomial, Row>> all_rows;
  for (const auto& c : program.constraints()) {
    CompiledConstraint cc;
    std::map<Monomial, Row> rows;
    // Gram side: s0 + sum s_i g_i - sum_v theta_v p_v = p_0.
    const int lo = PositiveAtOrigin(c.domain) ? CeilHalf(c.expression.min_degree()) : 0;
    const int half = c.degree / 2;
    if (lo <= half) {
      const GramParameterization g0 = ParameterizeBasis(MonomialBasis(n, lo, half));
      cc.s0.block = out.sdp.AddBlock(static_cast<int>(g0.basis.size()));
      cc.s0.basis = g0.basis;
      AddGramTerm(g0, cc.s0.block, Polynomial(n, 1.0), &rows);
    }
    const std::vector<int> degrees = PutinarAllocate(c);
    for (std::size_t i = 0; i < degrees.size(); ++i) {
      const int h = degrees[i] / 2;
      if (degrees[i] < 0 || lo > h) continue;
      const GramParameterization gi = ParameterizeBasis(MonomialBasis(n, lo, h));
      GramBlockInfo info;
      info.block = out.sdp.AddBlock(static_cast<int>(gi.basis.size()));
      info.basis = gi.basis;
      info.multiplier_of = static_cast<int>(i);
      AddGramTerm(gi, info.block, c.domain.constraints[i], &rows);
      cc.multipliers.push_back(std::move(info));
    }
    for (const auto& [m, coeff] : c.expression.constant().terms()) rows[m].rhs += coeff;
    for (const auto& [id, p] : c.expression.linear()) {
      for (const auto& [m, coeff] : p.terms()) rows[m].theta[id] -= coeff;
    }
    out.constraints.push_back(std::move(cc));
    all_rows.push_back(std::move(rows));
  }

  // Rows without Gram entries are plain linear equations in theta. Solve them
  // up front: theta = theta0 + N zeta.
  std::vector<const Row*> gram_rows;
  std::vector<const Row*> plain_rows;
  for (const auto& rows : all_rows) {
    for (const auto& [m, row] : rows) {
      const bool has_gram = std::any_of(row.entries.begin(), row.entries.end(),
                                        [](const SdpEntry& e) { return e.value != 0.0; });
      (has_gram ? gram_rows : plain_rows).push_back(&row);
    }
  }

  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(plain_rows.size()), nv);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(plain_rows.size()));
  for (std::size_t r = 0; r < plain_rows.size(); ++r) {
    for (const auto& [id, v] : plain_rows[r]->theta) E(static_cast<Eigen::Index>(r), id) = v;
    f(static_cast<Eigen::Index>(r)) = plain_rows[r]->rhs;
  }
  Eigen::MatrixXd N;
  if (E.rows() == 0) {
    out.theta0 = Eigen::VectorXd::Zero(nv);
    N = Eigen::MatrixXd::Identity(nv, nv);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    svd.setThreshold(1e-11);
    const Eigen::Index rank = smax > 0.0 ? svd.rank() : 0;
    out.theta0 = rank > 0 ? Eigen::VectorXd(svd.solve(f)) : Eigen::VectorXd::Zero(nv);
    N = svd.matrixV().rightCols(nv - rank);
    const double residual = (E * out.theta0 - f).lpNorm<Eigen::Infinity>();
    const double scale = 1.0 + f.lpNorm<Eigen::Infinity>();
    if (residual > 1e-9 * scale) {
      out.trivially_infeasible = true;
      out.trivial_residual = residual;
      out.message = fmt::format(
          "coefficient equations without Gram terms are inconsistent (residual {:.3g})", residual);
    }
  }

  // Gram-side theta coefficients in the reduced coordinates; keep only the
  // directions that reach some constraint.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gram_rows.size()), nv);
  for (std::size_t r = 0; r < gram_rows.size(); ++r) {
    for (const auto& [id, v] : gram_rows[r]->theta) B(static_cast<Eigen::Index>(r), id) = v;
  }
  if (N.cols() > 0 && B.rows() > 0) {
    const Eigen::MatrixXd BN = B * N;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(BN, Eigen::ComputeFullV);
    svd.setThreshold(1e-11);
    const Eigen::Index rank = svd.singularValues()(0) > 0.0 ? svd.rank() : 0;
    N = N * svd.matrixV().leftCols(rank);
  } else {
    N.resize(nv, 0);
  }
  out.null_basis = N;

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(nv);
  for (const auto& [id, w] : program.objective()) cost(id) += w;
  const Eigen::VectorXd reduced_cost = N.transpose() * cost;
  for (Eigen::Index k = 0; k < N.cols(); ++k) out.sdp.AddFreeVariable(reduced_cost(k));
  for (std::size_t b = 0; b < out.sdp.block_sizes.size(); ++b) {
    const int s = out.sdp.block_sizes[b];
    out.sdp.objective[b] = Eigen::MatrixXd::Zero(s, s);
  }

  const Eigen::VectorXd B_theta0 = B * out.theta0;
  const Eigen::MatrixXd BN = B * N;
  for (std::size_t r = 0; r < gram_rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    SdpConstraint con;
    // Merge duplicate (block, a, b) entries.
    std::map<std::tuple<int, int, int>, double> merged;
    for (const auto& e : gram_rows[r]->entries) merged[{e.block, e.row, e.col}] += e.value;
    for (const auto& [key, v] : merged) {
      if (v != 0.0) con.entries.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
    }
    for (Eigen::Index k = 0; k < BN.cols(); ++k) {
      if (BN(ri, k) != 0.0) con.free.emplace_back(static_cast<int>(k), BN(ri, k));
    }
    con.rhs = gram_rows[r]->rhs - B_theta0(ri);
    out.sdp.constraints.push_back(std::move(con));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

Polynomial GramPolynomial(int nvars, const std::vector<Monomial>& basis, const Eigen::MatrixXd& Q) {
  Polynomial p(nvars);
  const int s = static_cast<int>(basis.size());
  for (int a = 0; a < s; ++a) {
    p.AddTerm(basis[a] * basis[a], Q(a, a));
    for (int b = a + 1; b < s; ++b) p.AddTerm(basis[a] * basis[b], 2.0 * Q(a, b));
  }
  return p;
}

GramCertificate MakeGram(int nvars, const GramBlockInfo& info, const Eigen::MatrixXd& X, double scale,
                         const std::string& name) {
  GramCertificate g;
  g.basis = info.basis;
  g.multiplier_of = info.multiplier_of;
  const Eigen::MatrixXd sym = 0.5 * (X + X.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const double lambda_min = es.eigenvalues().size() > 0 ? es.eigenvalues()(0) : 0.0;
  if (lambda_min < -1e-6 * scale) {
    throw ResidualTooLarge(
        fmt::format("Gram matrix of '{}' is indefinite (min eigenvalue {:.3g})", name, lambda_min));
  }
  if (lambda_min < 0.0) {
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    g.gram = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    g.gram = 0.5 * (g.gram + g.gram.transpose());
  } else {
    g.gram = sym;
  }
  g.min_eigenvalue = std::max(0.0, lambda_min);
  g.polynomial = GramPolynomial(nvars, g.basis, g.gram);
  return g;
}

}  // namespace

SosSolution Extract(const SosProgram& program, const CompiledProgram& compiled, const SdpSolution& sdp) {
  const int n = program.nvars();
  SosSolution out;
  Eigen::VectorXd theta = compiled.theta0;
  if (compiled.null_basis.cols() > 0) {
    if (sdp.free.size() != compiled.null_basis.cols()) {
      throw std::invalid_argument("SDP solution does not match the compiled program");
    }
    theta += compiled.null_basis * sdp.free;
  }
  out.values.assign(theta.data(), theta.data() + theta.size());
  for (const auto& [id, w] : program.objective()) out.objective += w * theta(id);

  for (std::size_t c = 0; c < program.constraints().size(); ++c) {
    const SosConstraint& con = program.constraints()[c];
    const CompiledConstraint& cc = compiled.constraints[c];
    ConstraintCertificate cert;
    cert.name = con.name;
    cert.domain = con.domain;
    cert.expression = con.expression.Evaluate(out.values);
    cert.scale = std::max(1.0, cert.expression.max_abs_coefficient());

    Polynomial rhs(n);
    if (cc.s0.block >= 0) {
      cert.s0 = MakeGram(n, cc.s0, sdp.X.at(static_cast<std::size_t>(cc.s0.block)), cert.scale, con.name);
      rhs += cert.s0.polynomial;
    } else {
      cert.s0.polynomial = Polynomial(n);
    }
    for (const auto& info : cc.multipliers) {
      GramCertificate g =
          MakeGram(n, info, sdp.X.at(static_cast<std::size_t>(info.block)), cert.scale, con.name);
      rhs += g.polynomial * con.domain.constraints[static_cast<std::size_t>(info.multiplier_of)];
      cert.multipliers.push_back(std::move(g));
    }
    cert.residual = cert.expression.DistanceTo(rhs);
    if (cert.residual > 1e-6 * cert.scale) {
      throw ResidualTooLarge(fmt::format("certificate residual {:.3g} for '{}' exceeds 1e-6 x scale {:.3g}",
                                         cert.residual, con.name, cert.scale));
    }
    out.max_relative_residual = std::max(out.max_relative_residual, cert.residual / cert.scale);
    out.certificates.push_back(std::move(cert));
  }
  return out;
}

std::string ToString(SosStatus status) {
  switch (status) {
    case SosStatus::kFeasible:
      return "feasible";
    case SosStatus::kMarginal:
      return "marginal";
    case SosStatus::kInfeasible:
      return "infeasible";
    case SosStatus::kUnbounded:
      return "unbounded";
    case SosStatus::kNumericalTrouble:
      return "numerical_trouble";
  }
  return "unknown";
}

SosResult SolveSos(const SosProgram& program, const SosSolveOptions& options) {
  SosResult result;
  const CompiledProgram compiled = Compile(program);
  if (compiled.trivially_infeasible) {
    result.status = SosStatus::kInfeasible;
    result.tau = std::numeric_limits<double>::infinity();
    result.message = compiled.message;
    return result;
  }
  if (compiled.sdp.constraints.empty()) {
    // Nothing left to certify: every coefficient equation was solved exactly.
    result.status = SosStatus::kFeasible;
    SdpSolution empty;
    empty.status = SdpStatus::kOptimal;
    for (int s : compiled.sdp.block_sizes) empty.X.push_back(Eigen::MatrixXd::Zero(s, s));
    empty.free = Eigen::VectorXd::Zero(compiled.null_basis.cols());
    result.solution = Extract(program, compiled, empty);
    result.has_solution = true;
    return result;
  }

  bool try_extract = false;
  if (options.mode == SosMode::kOptimize) {
    result.sdp = Solve(compiled.sdp, options.feasibility.sdp);
    result.sdp_iterations = result.sdp.iterations;
    switch (result.sdp.status) {
      case SdpStatus::kOptimal:
        result.status = SosStatus::kFeasible;
        try_extract = true;
        break;
      case SdpStatus::kInfeasible:
        result.status = SosStatus::kInfeasible;
        break;
      case SdpStatus::kUnbounded:
        result.status = SosStatus::kUnbounded;
        break;
      case SdpStatus::kNumericalTrouble:
        result.status = SosStatus::kNumericalTrouble;
        break;
    }
  } else {
    const FeasibilityResult fr = SolveFeasibility(compiled.sdp, options.feasibility);
    result.sdp = fr.solution;
    result.sdp_iterations = fr.solution.iterations;
    result.tau = fr.tau;
    switch (fr.status) {
      case FeasibilityStatus::kFeasible:
        result.status = SosStatus::kFeasible;
        try_extract = true;
        break;
      case FeasibilityStatus::kMarginal:
        result.status = SosStatus::kMarginal;
        break;
      case FeasibilityStatus::kInfeasible:
        result.status = SosStatus::kInfeasible;
        break;
      case FeasibilityStatus::kNumericalTrouble:
        result.status = SosStatus::kNumericalTrouble;
        break;
    }
  }
  result.message = result.sdp.message;
  if (try_extract) {
    try {
      result.solution = Extract(program, compiled, result.sdp);
      result.has_solution = true;
    } catch (const ResidualTooLarge& err) {
      result.status = SosStatus::kNumericalTrouble;
      result.message = err.what();
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output and checks

namespace {

nlohmann::json GramToJson(const GramCertificate& g) {
  nlohmann::json basis = nlohmann::json::array();
  for (const auto& m : g.basis) basis.push_back(m.exponents());
  nlohmann::json gram = nlohmann::json::array();
  for (Eigen::Index i = 0; i < g.gram.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < g.gram.cols(); ++j) row.push_back(g.gram(i, j));
    gram.push_back(std::move(row));
  }
  return {{"basis", basis}, {"gram", gram}, {"min_eigenvalue", g.min_eigenvalue}};
}

}  // namespace

nlohmann::json CertificateToJson(const SosProgram& program, const SosSolution& solution) {
  nlohmann::json doc;
  nlohmann::json vars = nlohmann::json::array();
  for (int v = 0; v < program.num_variables(); ++v) {
    vars.push_back({{"name", program.variable_names()[static_cast<std::size_t>(v)]},
                    {"value", solution.values[static_cast<std::size_t>(v)]}});
  }
  doc["variables"] = vars;
  doc["objective"] = solution.objective;
  nlohmann::json cons = nlohmann::json::array();
  for (const auto& cert : solution.certificates) {
    nlohmann::json c;
    c["name"] = cert.name;
    c["expression"] = cert.expression.ToString();
    c["residual"] = cert.residual;
    c["scale"] = cert.scale;
    if (!cert.s0.basis.empty()) c["s0"] = GramToJson(cert.s0);
    nlohmann::json mults = nlohmann::json::array();
    for (const auto& g : cert.multipliers) {
      nlohmann::json m = GramToJson(g);
      m["g"] = cert.domain.constraints[static_cast<std::size_t>(g.multiplier_of)].ToString();
      mults.push_back(std::move(m));
    }
    c["multipliers"] = mults;
    cons.push_back(std::move(c));
  }
  doc["constraints"] = cons;
  return doc;
}

SoundnessReport SampleSoundness(const ConstraintCertificate& cert, int samples, double half_width,
                                unsigned long long seed) {
  SoundnessReport report;
  const int n = cert.expression.nvars();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-half_width, half_width);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int k = 0; k < samples; ++k) {
    for (auto& xi : x) xi = uni(rng);
    const double e = cert.expression.Evaluate(x);
    const double s0 = cert.s0.polynomial.is_zero() ? 0.0 : cert.s0.polynomial.Evaluate(x);
    double rhs = s0;
    double min_sos = s0;
    for (const auto& g : cert.multipliers) {
      const double si = g.polynomial.Evaluate(x);
      const double gi = cert.domain.constraints[static_cast<std::size_t>(g.multiplier_of)].Evaluate(x);
      rhs += si * gi;
      min_sos = std::min(min_sos, si);
    }
    report.max_identity_error = std::max(report.max_identity_error, std::abs(e - rhs) / cert.scale);
    report.min_sos_value = std::min(report.min_sos_value, min_sos / cert.scale);
  }
  report.passed = report.max_identity_error <= 1e-5 && report.min_sos_value >= -1e-6;
  return report;
}

}  // namespace ratecert
