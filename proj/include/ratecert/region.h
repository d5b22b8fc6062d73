#pragma once

#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ratecert/polynomial.h"
#include "ratecert/simulate.h"
#include "ratecert/stability.h"

namespace ratecert {

/// The domain has no constraint that bounds it, so its boundary cannot be
/// sampled.
class UnboundedDomain : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SublevelOptions {
  /// Ray directions per constraint surface.
  int samples_per_constraint = 10000;
  /// The sampled minimum is multiplied by this factor.
  double shrink = 0.999;
  /// Number of best boundary samples refined by local descent.
  int refine_count = 8;
  unsigned long long seed = 0;
  int jobs = 1;
};

/// True when some constraint g_i tends to -inf along every sampled ray from
/// the origin, which makes the domain compact.
bool HasBoundingConstraint(const SemialgebraicSet& domain);

/// shrink * min of V over the boundary of the domain, where the boundary is
/// sampled as the zero set of each constraint along rays from the origin (kept
/// where the other constraints hold) and the best samples are refined by
/// local descent along the surface. Throws UnboundedDomain.
double MaxSublevel(const Polynomial& V, const SemialgebraicSet& domain, const SublevelOptions& options = {});

struct InvarianceReport {
  bool passed = true;
  int samples = 0;
  /// Largest grad(V).f / (|grad V| |f|) over the level-surface samples.
  double worst_ratio = 0.0;
  Eigen::VectorXd worst_point;
};

/// Samples the level surface V = c along rays from the origin (points with
/// |V - c| <= 1e-3 c) and checks grad(V).f <= 1e-6 |grad V| |f| there.
InvarianceReport CheckInvariance(const Polynomial& V, double c, const VectorField& f, int samples,
                                 unsigned long long seed = 0);

/// Closed polyline of the level curve V = c in the plane; the first point is
/// not repeated at the end.
struct Polyline {
  std::vector<double> angles;
  std::vector<Eigen::Vector2d> points;
  bool from_marching_squares = false;
};

/// Level curve V = c by ray casting: for each of `resolution` equally spaced
/// angles the first crossing of level c is bracketed and bisected, and the
/// point on the V <= c side is kept. When a ray does not cross within
/// `search_radius` the curve is traced by marching squares on a grid instead.
Polyline Boundary2d(const Polynomial& V, double c, int resolution, double search_radius = 1e3);

/// Ray casting only; throws std::runtime_error naming the first angle whose
/// ray does not cross level c.
Polyline PolarBoundary(const Polynomial& V, double c, int resolution, double search_radius);
/// Marching squares on a grid x 2 grid over [-half_width, half_width]^2; returns
/// the longest closed loop, with points bisected onto the level curve.
Polyline MarchingSquaresBoundary(const Polynomial& V, double c, double half_width, int grid);

/// Points of {V <= c} drawn along random rays: for direction u the ray is
/// scanned out to `max_radius` for its first crossing rho(u), and the point
/// rho(u) * U^{1/n} u is returned (U uniform).
std::vector<Eigen::VectorXd> SampleSublevel(const Polynomial& V, double c, int count, double max_radius,
                                            unsigned long long seed);

struct ContainmentReport {
  bool holds = true;
  int samples = 0;
  /// Largest of the containing test (V/c - 1 for a sublevel set, -margin for
  /// a domain) over the samples.
  double worst = 0.0;
  Eigen::VectorXd worst_point;
};

/// Every sampled point of {V <= c} lies strictly inside the domain.
ContainmentReport CheckSublevelInside(const Polynomial& V, double c, const SemialgebraicSet& domain, int samples,
                                      unsigned long long seed);

struct RegionResult {
  double c_star = 0.0;
  Polynomial V;
  SemialgebraicSet domain;
  /// Empty for n != 2.
  Polyline boundary;
  bool invariance_checked = false;
  InvarianceReport invariance;
};

struct RegionOptions {
  SublevelOptions sublevel;
  int boundary_resolution = 720;
  int invariance_samples = 2000;
};

/// c*, the planar boundary and (when `field` is set) the invariance check.
RegionResult AnalyzeRegion(const Polynomial& V, const SemialgebraicSet& domain, const VectorField& field,
                           const RegionOptions& options = {});

/// Sampled containment of region `inner` in region `outer`: points drawn from
/// the inner sublevel set (plus its planar boundary) must satisfy
/// V_outer <= c_outer (1 + rel_tol).
ContainmentReport CheckNesting(const RegionResult& inner, const RegionResult& outer, int samples,
                               unsigned long long seed, double rel_tol = 1e-6);

/// Domain family indexed by a radius.
using DomainOfRadius = std::function<SemialgebraicSet(double)>;

struct RadiusSearchOptions {
  double r_lo = 0.01;
  double r_hi = 2.0;
  double rel_tol = 1e-2;
};

struct RateRegion {
  double k = 0.0;
  double radius = 0.0;
  StabilityCertificate certificate;
  RegionResult region;
};

/// Largest radius in the bracket for which the program in `spec` is feasible
/// at rate k (bisection; feasibility is assumed monotone in the radius), and
/// the region of the certificate found there. Throws InfeasibleAtKLo when k is
/// infeasible at r_lo.
RateRegion RegionForRate(const AnalysisSpec& spec, double k, const DomainOfRadius& domain_of_radius,
                         const RadiusSearchOptions& search = {}, const RegionOptions& options = {});

/// "angle,x1,x2" header and one row per polyline point.
void WritePolylineCsv(const Polyline& line, std::ostream& out);

}  // namespace ratecert
