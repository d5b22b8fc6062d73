#include "ratecert/region.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <utility>

#include <fmt/format.h>

#include "ratecert/parallel.h"

namespace ratecert {

namespace {

using Eigen::Vector2d;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kBisectionSteps = 200;

// Bisects phi on [lo, hi] given phi(lo) and phi(hi) of opposite signs; returns
// the bracket end on the side where phi has the sign of phi(lo).
template <typename Phi>
double BisectRoot(const Phi& phi, double lo, double hi) {
  const bool lo_negative = phi(lo) < 0.0;
  for (int it = 0; it < kBisectionSteps && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((phi(mid) < 0.0) == lo_negative) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// First rho in (0, max_radius] with V(rho u) >= c, on the V < c side; -1 when
// the ray stays below c or starts at or above it.
double FirstLevelCrossing(const Polynomial& V, double c, const VectorXd& u, double max_radius) {
  auto phi = [&](double rho) { return V.Evaluate(VectorXd(rho * u)) - c; };
  if (phi(0.0) >= 0.0) return -1.0;
  double lo = 0.0;
  double rho = max_radius * 1e-6;
  while (true) {
    if (phi(rho) >= 0.0) return BisectRoot(phi, lo, rho);
    if (rho >= max_radius) return -1.0;
    lo = rho;
    rho = std::min(rho * 1.02, max_radius);
  }
}

// Directions on the unit sphere: the deterministic sphere lattice for n <= 3
// and seeded Gaussian directions above.
std::vector<VectorXd> Directions(int n, int count, unsigned long long seed) {
  return SphereInitialConditions(n, count, 1.0, seed);
}

std::vector<VectorXd> RandomDirections(int n, int count, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    VectorXd u(n);
    do {
      for (int j = 0; j < n; ++j) u[j] = normal(rng);
    } while (u.norm() == 0.0);
    out.push_back(u / u.norm());
  }
  return out;
}

// Sign of the leading coefficient of rho -> p(rho u); 0 when p vanishes along u.
int LeadingSignAlong(const Polynomial& p, const VectorXd& u) {
  std::vector<double> coeffs(static_cast<std::size_t>(std::max(p.degree(), 0) + 1), 0.0);
  for (const auto& [m, c] : p.terms()) {
    double term = c;
    for (int i = 0; i < p.nvars(); ++i) term *= std::pow(u[i], m[i]);
    coeffs[static_cast<std::size_t>(m.degree())] += term;
  }
  const double tol = 1e-12 * std::max(1.0, p.max_abs_coefficient());
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
    if (std::abs(*it) > tol) return *it > 0.0 ? 1 : -1;
  }
  return 0;
}

struct BoundarySample {
  double value = kInf;
  int constraint = -1;
  VectorXd direction;
  double rho = 0.0;
};

class BoundarySampler {
 public:
  BoundarySampler(const Polynomial& V, const SemialgebraicSet& domain, double max_radius)
      : V_(V), domain_(domain), max_radius_(max_radius) {}

  // Zeros of g_i along the ray (scan plus bisection) that lie in the domain.
  std::vector<double> Roots(int i, const VectorXd& u) const {
    const Polynomial& g = domain_.constraints[static_cast<std::size_t>(i)];
    auto phi = [&](double rho) { return g.Evaluate(VectorXd(rho * u)); };
    constexpr int kScan = 200;
    std::vector<double> roots;
    double prev_rho = 0.0;
    double prev = phi(0.0);
    for (int s = 1; s <= kScan; ++s) {
      const double rho = max_radius_ * s / kScan;
      const double cur = phi(rho);
      if ((prev < 0.0) != (cur < 0.0)) roots.push_back(BisectRoot(phi, prev_rho, rho));
      prev_rho = rho;
      prev = cur;
    }
    return roots;
  }

  // V at rho u when the point satisfies the other constraints; +inf otherwise.
  double Value(int i, const VectorXd& u, double rho) const {
    const VectorXd x = rho * u;
    for (std::size_t j = 0; j < domain_.constraints.size(); ++j) {
      if (static_cast<int>(j) == i) continue;
      const Polynomial& g = domain_.constraints[j];
      if (g.Evaluate(x) < -1e-9 * std::max(1.0, g.max_abs_coefficient())) return kInf;
    }
    return V_.Evaluate(x);
  }

  // Root of g_i along u close to `rho_guess`; -1 when none is bracketed.
  double RootNear(int i, const VectorXd& u, double rho_guess) const {
    const Polynomial& g = domain_.constraints[static_cast<std::size_t>(i)];
    auto phi = [&](double rho) { return g.Evaluate(VectorXd(rho * u)); };
    for (double delta = 1e-4; delta <= 0.5; delta *= 2.0) {
      const double lo = std::max(0.0, rho_guess * (1.0 - delta));
      const double hi = rho_guess * (1.0 + delta);
      if ((phi(lo) < 0.0) != (phi(hi) < 0.0)) return BisectRoot(phi, lo, hi);
    }
    return -1.0;
  }

  // Pattern search over directions near s.direction on the surface g_i = 0.
  BoundarySample Refine(BoundarySample s, double step) const {
    const int n = static_cast<int>(s.direction.size());
    if (n == 1) return s;
    while (step > 1e-11) {
      bool improved = false;
      // Orthonormal tangent basis at the current direction.
      Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(n, n);
      basis.col(0) = s.direction;
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
      const Eigen::MatrixXd q = qr.householderQ();
      for (int t = 1; t < n && !improved; ++t) {
        for (double sign : {1.0, -1.0}) {
          VectorXd u = s.direction + sign * step * q.col(t);
          u.normalize();
          const double rho = RootNear(s.constraint, u, s.rho);
          if (rho < 0.0) continue;
          const double v = Value(s.constraint, u, rho);
          if (v < s.value) {
            s = {v, s.constraint, u, rho};
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    return s;
  }

 private:
  const Polynomial& V_;
  const SemialgebraicSet& domain_;
  double max_radius_;
};

}  // namespace

bool HasBoundingConstraint(const SemialgebraicSet& domain) {
  const int n = domain.nvars;
  std::vector<VectorXd> dirs = Directions(n, n == 1 ? 2 : 2000, 0);
  for (int j = 0; j < n; ++j) {
    dirs.push_back(VectorXd::Unit(n, j));
    dirs.push_back(-VectorXd::Unit(n, j));
  }
  for (const Polynomial& g : domain.constraints) {
    const bool negative =
        std::all_of(dirs.begin(), dirs.end(), [&](const VectorXd& u) { return LeadingSignAlong(g, u) < 0; });
    if (negative) return true;
  }
  return false;
}

double MaxSublevel(const Polynomial& V, const SemialgebraicSet& domain, const SublevelOptions& options) {
  if (V.nvars() != domain.nvars) throw std::invalid_argument("V and the domain have different dimensions");
  if (domain.is_global() || !HasBoundingConstraint(domain)) {
    throw UnboundedDomain("the domain needs a bounding constraint such as R^2 - x^T x >= 0");
  }
  if (options.samples_per_constraint < 1) throw std::invalid_argument("need at least one boundary sample");
  const int n = domain.nvars;
  const double radius = DomainRadius(domain);
  if (!std::isfinite(radius)) throw UnboundedDomain("could not bound the domain along rays");
  const BoundarySampler sampler(V, domain, 1.05 * radius);
  const std::vector<VectorXd> dirs = Directions(n, options.samples_per_constraint, options.seed);
  const int m = static_cast<int>(domain.constraints.size());

  // Best sample per (constraint, direction), reduced in index order.
  std::vector<BoundarySample> best(static_cast<std::size_t>(m) * dirs.size());
  ParallelFor(static_cast<int>(best.size()), options.jobs, [&](int idx) {
    const int i = idx / static_cast<int>(dirs.size());
    const VectorXd& u = dirs[static_cast<std::size_t>(idx) % dirs.size()];
    BoundarySample& b = best[static_cast<std::size_t>(idx)];
    for (double rho : sampler.Roots(i, u)) {
      const double v = sampler.Value(i, u, rho);
      if (v < b.value) b = {v, i, u, rho};
    }
  });
  std::stable_sort(best.begin(), best.end(),
                   [](const BoundarySample& a, const BoundarySample& b) { return a.value < b.value; });
  if (best.empty() || !std::isfinite(best.front().value)) {
    throw std::runtime_error("no boundary point of the domain was found along the sampled rays");
  }
  const double spacing = n == 1 ? 0.0 : std::pow(4.0 * std::numbers::pi / options.samples_per_constraint, 1.0 / (n - 1));
  const int refine = std::min<int>(options.refine_count, static_cast<int>(best.size()));
  std::vector<double> refined(static_cast<std::size_t>(refine), kInf);
  ParallelFor(refine, options.jobs, [&](int r) {
    const BoundarySample& s = best[static_cast<std::size_t>(r)];
    if (std::isfinite(s.value)) refined[static_cast<std::size_t>(r)] = sampler.Refine(s, spacing).value;
  });
  const double min_value = std::min(best.front().value, *std::min_element(refined.begin(), refined.end()));
  return options.shrink * min_value;
}

InvarianceReport CheckInvariance(const Polynomial& V, double c, const VectorField& f, int samples,
                                 unsigned long long seed) {
  if (!(c > 0.0)) throw std::invalid_argument("the level must be positive");
  const int n = V.nvars();
  const std::vector<Polynomial> grad = V.Gradient();
  InvarianceReport report;
  report.worst_ratio = -kInf;
  for (const VectorXd& u : Directions(n, samples, seed)) {
    const double rho = FirstLevelCrossing(V, c, u, 1e6);
    if (rho < 0.0) continue;
    const VectorXd x = rho * u;
    if (std::abs(V.Evaluate(x) - c) > 1e-3 * c) continue;
    VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = grad[static_cast<std::size_t>(i)].Evaluate(x);
    const VectorXd fx = f(x);
    const double scale = g.norm() * fx.norm();
    const double ratio = scale > 0.0 ? g.dot(fx) / scale : 0.0;
    ++report.samples;
    if (ratio > report.worst_ratio) {
      report.worst_ratio = ratio;
      report.worst_point = x;
    }
  }
  if (report.samples == 0) throw std::runtime_error("no ray reached the level surface");
  report.passed = report.worst_ratio <= 1e-6;
  return report;
}

Polyline PolarBoundary(const Polynomial& V, double c, int resolution, double search_radius) {
  if (V.nvars() != 2) throw std::invalid_argument("boundaries are extracted for planar systems only");
  if (resolution < 1) throw std::invalid_argument("resolution must be positive");
  Polyline line;
  for (int j = 0; j < resolution; ++j) {
    const double a = 2.0 * std::numbers::pi * j / resolution;
    VectorXd u(2);
    u << std::cos(a), std::sin(a);
    const double rho = FirstLevelCrossing(V, c, u, search_radius);
    if (rho < 0.0) throw std::runtime_error(fmt::format("the ray at angle {} does not cross level {}", a, c));
    line.angles.push_back(a);
    line.points.push_back(Vector2d(rho * u[0], rho * u[1]));
  }
  return line;
}

Polyline MarchingSquaresBoundary(const Polynomial& V, double c, double half_width, int grid) {
  if (V.nvars() != 2) throw std::invalid_argument("boundaries are extracted for planar systems only");
  if (grid < 2) throw std::invalid_argument("grid must have at least two cells per side");
  const double h = 2.0 * half_width / grid;
  auto at = [&](int i, int j) { return Vector2d(-half_width + i * h, -half_width + j * h); };
  auto value = [&](const Vector2d& p) { return V.Evaluate(VectorXd(p)) - c; };
  std::vector<double> vals(static_cast<std::size_t>((grid + 1) * (grid + 1)));
  for (int i = 0; i <= grid; ++i) {
    for (int j = 0; j <= grid; ++j) vals[static_cast<std::size_t>(i * (grid + 1) + j)] = value(at(i, j));
  }
  auto val = [&](int i, int j) { return vals[static_cast<std::size_t>(i * (grid + 1) + j)]; };
  auto inside = [&](int i, int j) { return val(i, j) < 0.0; };

  // Edge ids: horizontal edge (i,j)-(i+1,j) and vertical edge (i,j)-(i,j+1).
  auto hedge = [&](int i, int j) { return 2L * (static_cast<long>(i) * (grid + 1) + j); };
  auto vedge = [&](int i, int j) { return 2L * (static_cast<long>(i) * (grid + 1) + j) + 1; };
  std::map<long, std::vector<long>> adjacency;
  auto link = [&](long a, long b) {
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  };
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const bool b0 = inside(i, j), b1 = inside(i + 1, j), b2 = inside(i + 1, j + 1), b3 = inside(i, j + 1);
      std::vector<long> cut;  // crossing edges in counter-clockwise order
      if (b0 != b1) cut.push_back(hedge(i, j));
      if (b1 != b2) cut.push_back(vedge(i + 1, j));
      if (b3 != b2) cut.push_back(hedge(i, j + 1));
      if (b0 != b3) cut.push_back(vedge(i, j));
      if (cut.size() == 2) {
        link(cut[0], cut[1]);
      } else if (cut.size() == 4) {
        // Saddle: the center value decides which corners are joined.
        const bool center = value(at(i, j) + Vector2d(0.5 * h, 0.5 * h)) < 0.0;
        if (center == b0) {
          link(cut[0], cut[1]);
          link(cut[2], cut[3]);
        } else {
          link(cut[0], cut[3]);
          link(cut[1], cut[2]);
        }
      }
    }
  }
  auto edge_point = [&](long id) {
    const long cell = id / 2;
    const int i = static_cast<int>(cell / (grid + 1));
    const int j = static_cast<int>(cell % (grid + 1));
    Vector2d a = at(i, j);
    Vector2d b = id % 2 == 0 ? at(i + 1, j) : at(i, j + 1);
    if (value(a) >= 0.0) std::swap(a, b);
    auto phi = [&](double s) { return value(a + s * (b - a)); };
    return Vector2d(a + BisectRoot(phi, 0.0, 1.0) * (b - a));
  };

  std::vector<long> best_loop;
  std::map<long, bool> visited;
  for (const auto& [start, _] : adjacency) {
    if (visited[start]) continue;
    std::vector<long> loop{start};
    visited[start] = true;
    long prev = -1, cur = start;
    bool closed = false;
    while (true) {
      long next = -1;
      for (long nb : adjacency[cur]) {
        if (nb != prev && (!visited[nb] || (nb == start && loop.size() > 2))) {
          next = nb;
          break;
        }
      }
      if (next < 0) break;
      if (next == start) {
        closed = true;
        break;
      }
      visited[next] = true;
      loop.push_back(next);
      prev = cur;
      cur = next;
    }
    if (closed && loop.size() > best_loop.size()) best_loop = loop;
  }
  if (best_loop.empty()) throw std::runtime_error(fmt::format("no closed level curve at level {} on the grid", c));
  Polyline line;
  line.from_marching_squares = true;
  for (long id : best_loop) {
    const Vector2d p = edge_point(id);
    line.angles.push_back(std::atan2(p[1], p[0]));
    line.points.push_back(p);
  }
  return line;
}

Polyline Boundary2d(const Polynomial& V, double c, int resolution, double search_radius) {
  try {
    return PolarBoundary(V, c, resolution, search_radius);
  } catch (const std::runtime_error&) {
    return MarchingSquaresBoundary(V, c, search_radius, std::max(resolution, 256));
  }
}

std::vector<VectorXd> SampleSublevel(const Polynomial& V, double c, int count, double max_radius,
                                     unsigned long long seed) {
  const int n = V.nvars();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (const VectorXd& u : RandomDirections(n, count, seed)) {
    double rho = FirstLevelCrossing(V, c, u, max_radius);
    if (rho < 0.0) rho = max_radius;
    out.push_back(rho * std::pow(unit(rng), 1.0 / n) * u);
  }
  return out;
}

ContainmentReport CheckSublevelInside(const Polynomial& V, double c, const SemialgebraicSet& domain, int samples,
                                      unsigned long long seed) {
  const double radius = DomainRadius(domain);
  const double max_radius = std::isfinite(radius) ? 2.0 * radius : 1e3;
  ContainmentReport report;
  report.worst = -kInf;
  std::vector<VectorXd> points = SampleSublevel(V, c, samples, max_radius, seed);
  // The outermost point of each ray is the most demanding one.
  for (const VectorXd& u : RandomDirections(V.nvars(), samples, seed + 1)) {
    const double rho = FirstLevelCrossing(V, c, u, max_radius);
    points.push_back((rho < 0.0 ? max_radius : rho) * u);
  }
  for (const VectorXd& x : points) {
    const double w = -domain.Margin(x);
    ++report.samples;
    if (w > report.worst) {
      report.worst = w;
      report.worst_point = x;
    }
  }
  report.holds = report.worst < 0.0;
  return report;
}

RegionResult AnalyzeRegion(const Polynomial& V, const SemialgebraicSet& domain, const VectorField& field,
                           const RegionOptions& options) {
  RegionResult result;
  result.V = V;
  result.domain = domain;
  result.c_star = MaxSublevel(V, domain, options.sublevel);
  if (domain.nvars == 2) {
    result.boundary = Boundary2d(V, result.c_star, options.boundary_resolution, 2.0 * DomainRadius(domain));
  }
  if (field) {
    result.invariance = CheckInvariance(V, result.c_star, field, options.invariance_samples, options.sublevel.seed);
    result.invariance_checked = true;
  }
  return result;
}

ContainmentReport CheckNesting(const RegionResult& inner, const RegionResult& outer, int samples,
                               unsigned long long seed, double rel_tol) {
  const double radius = DomainRadius(inner.domain);
  const double max_radius = std::isfinite(radius) ? 2.0 * radius : 1e3;
  std::vector<VectorXd> points = SampleSublevel(inner.V, inner.c_star, samples, max_radius, seed);
  for (const Vector2d& p : inner.boundary.points) points.push_back(VectorXd(p));
  ContainmentReport report;
  report.worst = -kInf;
  for (const VectorXd& x : points) {
    const double w = outer.V.Evaluate(x) / outer.c_star - 1.0;
    ++report.samples;
    if (w > report.worst) {
      report.worst = w;
      report.worst_point = x;
    }
  }
  report.holds = report.worst <= rel_tol;
  return report;
}

RateRegion RegionForRate(const AnalysisSpec& spec, double k, const DomainOfRadius& domain_of_radius,
                         const RadiusSearchOptions& search, const RegionOptions& options) {
  if (spec.condition == Condition::kFiniteTime) {
    throw std::invalid_argument("regions are computed for polynomial Lyapunov functions in the state");
  }
  if (!(search.r_lo > 0.0 && search.r_hi > search.r_lo)) throw std::invalid_argument("bad radius bracket");
  AnalysisSpec local = spec;
  auto solve = [&](double r) {
    local.domain = domain_of_radius(r);
    SolveOutcome o = SolveAtRate(local, k);
    if (o.status == SosStatus::kNumericalTrouble || o.status == SosStatus::kUnbounded) {
      throw NumericalTroubleError(fmt::format("solver trouble at radius {}: {}", r, o.message), search.r_lo,
                                  search.r_hi);
    }
    return o;
  };
  RateRegion out;
  out.k = k;
  SolveOutcome at_lo = solve(search.r_lo);
  if (at_lo.status != SosStatus::kFeasible || !at_lo.has_certificate) {
    throw InfeasibleAtKLo(k, ToString(at_lo.status));
  }
  double lo = search.r_lo;
  out.certificate = at_lo.certificate;
  SolveOutcome at_hi = solve(search.r_hi);
  if (at_hi.status == SosStatus::kFeasible && at_hi.has_certificate) {
    lo = search.r_hi;
    out.certificate = at_hi.certificate;
  } else {
    double hi = search.r_hi;
    while (hi - lo > search.rel_tol * lo) {
      const double mid = 0.5 * (lo + hi);
      SolveOutcome o = solve(mid);
      if (o.status == SosStatus::kFeasible && o.has_certificate) {
        lo = mid;
        out.certificate = o.certificate;
      } else {
        hi = mid;
      }
    }
  }
  out.radius = lo;
  out.region = AnalyzeRegion(out.certificate.V, domain_of_radius(lo), MakeVectorField(spec.field), options);
  return out;
}

void WritePolylineCsv(const Polyline& line, std::ostream& out) {
  out << "angle,x1,x2\n";
  for (std::size_t i = 0; i < line.points.size(); ++i) {
    out << fmt::format("{:.17g},{:.17g},{:.17g}\n", line.angles[i], line.points[i][0], line.points[i][1]);
  }
}

}  // namespace ratecert
