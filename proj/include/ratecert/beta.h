#pragma once

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ratecert/trajectory.h"

namespace ratecert {

enum class BetaKind { kExponential, kRational, kFiniteTime };

std::string ToString(BetaKind kind);

/// A normalized, time-invariant comparison function beta(y, t).
struct BetaFamily {
  BetaKind kind = BetaKind::kExponential;
  /// Exponent p of the rational family (alpha = |x|_2^p).
  double p = 2.0;
  /// Quasi-norm index and power of the finite-time family (alpha = |x|_p^eta).
  double p_norm = 2.0;
  double eta = 0.5;

  static BetaFamily Exponential() { return {}; }
  static BetaFamily RationalFamily(double p) { return {BetaKind::kRational, p, 2.0, 0.5}; }
  static BetaFamily FiniteTime(double p_norm, double eta) { return {BetaKind::kFiniteTime, 2.0, p_norm, eta}; }
};

/// y e^-t, y / (1 + y t), max(y - t, 0).
double Beta(const BetaFamily& fam, double y, double t);
/// d/dt beta(y, t) at t = 0: -y, -y^2, and -1 (y > 0) or 0.
double Rho(const BetaFamily& fam, double y);
/// Negative-time extension beta(y, -t); +inf past the rational escape time.
double BetaNeg(const BetaFamily& fam, double y, double t);

/// alpha(x) = |x|_2^exponent or (sum |x_i|^p)^(eta/p).
struct AlphaMeasure {
  enum class Kind { kTwoNormPow, kQuasiNormPow } kind = Kind::kTwoNormPow;
  double exponent = 1.0;
  double p = 2.0;
  double eta = 1.0;

  static AlphaMeasure TwoNormPow(double exponent) { return {Kind::kTwoNormPow, exponent, 2.0, 1.0}; }
  static AlphaMeasure QuasiNormPow(double p, double eta) { return {Kind::kQuasiNormPow, 1.0, p, eta}; }
  /// The measure paired with each family: |x|_2, |x|_2^p, |x|_p^eta.
  static AlphaMeasure ForFamily(const BetaFamily& fam);

  double operator()(const Eigen::VectorXd& x) const;
};

using BetaFunction = std::function<double(double y, double t)>;
using RhoFunction = std::function<double(double y)>;

struct TimeInvarianceReport {
  bool passed = true;
  /// First violating (y, t0, t) triple of the semigroup test.
  std::optional<std::array<double, 3>> semigroup_violation;
  /// First y where the forward difference disagrees with rho.
  std::optional<double> rho_violation;
  std::string message;
};

/// Checks beta(beta(y,t0),t) = beta(y,t0+t) on the grid (tol 1e-10 (1+y)) and,
/// if rho is given, (beta(y,h)-y)/h -> rho(y) (rel tol 1e-4).
TimeInvarianceReport CheckTimeInvariance(const BetaFunction& beta, const RhoFunction& rho,
                                         const std::vector<double>& ys, const std::vector<double>& ts);
TimeInvarianceReport CheckTimeInvariance(const BetaFamily& fam, const std::vector<double>& ys,
                                         const std::vector<double>& ts);

struct PointwiseBoundResult {
  bool holds = true;
  /// max_j alpha(x(t_j)) - M beta(alpha(x0), k t_j).
  double worst_margin = -std::numeric_limits<double>::infinity();
  double worst_time = 0.0;
};

/// Relative tolerance on the bound value in pointwise checks.
inline constexpr double kPointwiseRelTol = 1e-7;

/// Absolute slack of pointwise checks: zero, except 1e-9 alpha0 for the
/// finite-time family, whose bound vanishes after the settling time.
double DefaultPointwiseSlack(const BetaFamily& fam, double alpha0);

/// Checks alpha(x(t)) <= M beta(alpha(x0), k t) (1 + kPointwiseRelTol) + slack
/// at every sample; the slack defaults to DefaultPointwiseSlack.
PointwiseBoundResult PointwiseBound(const BetaFamily& fam, const AlphaMeasure& alpha, double M, double k,
                                    const Trajectory& traj, std::optional<double> slack = std::nullopt);

}  // namespace ratecert
