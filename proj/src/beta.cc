#include "ratecert/beta.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace ratecert {

std::string ToString(BetaKind kind) {
  switch (kind) {
    case BetaKind::kExponential:
      return "exponential";
    case BetaKind::kRational:
      return "rational";
    case BetaKind::kFiniteTime:
      return "finite_time";
  }
  return "unknown";
}

double Beta(const BetaFamily& fam, double y, double t) {
  switch (fam.kind) {
    case BetaKind::kExponential:
      return y * std::exp(-t);
    case BetaKind::kRational:
      return y / (1.0 + y * t);
    case BetaKind::kFiniteTime:
      return std::max(y - t, 0.0);
  }
  throw std::logic_error("Beta: unknown family");
}

double Rho(const BetaFamily& fam, double y) {
  switch (fam.kind) {
    case BetaKind::kExponential:
      return -y;
    case BetaKind::kRational:
      return -y * y;
    case BetaKind::kFiniteTime:
      return y > 0.0 ? -1.0 : 0.0;
  }
  throw std::logic_error("Rho: unknown family");
}

double BetaNeg(const BetaFamily& fam, double y, double t) {
  switch (fam.kind) {
    case BetaKind::kExponential:
      return y * std::exp(t);
    case BetaKind::kRational: {
      const double denom = 1.0 - y * t;
      return denom > 0.0 ? y / denom : std::numeric_limits<double>::infinity();
    }
    case BetaKind::kFiniteTime:
      return y + t;
  }
  throw std::logic_error("BetaNeg: unknown family");
}

AlphaMeasure AlphaMeasure::ForFamily(const BetaFamily& fam) {
  switch (fam.kind) {
    case BetaKind::kExponential:
      return TwoNormPow(1.0);
    case BetaKind::kRational:
      return TwoNormPow(fam.p);
    case BetaKind::kFiniteTime:
      return QuasiNormPow(fam.p_norm, fam.eta);
  }
  throw std::logic_error("AlphaMeasure: unknown family");
}

double AlphaMeasure::operator()(const Eigen::VectorXd& x) const {
  if (kind == Kind::kTwoNormPow) {
    const double n2 = x.squaredNorm();
    return exponent == 2.0 ? n2 : std::pow(n2, 0.5 * exponent);
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(std::abs(x(i)), p);
  return std::pow(s, eta / p);
}

TimeInvarianceReport CheckTimeInvariance(const BetaFunction& beta, const RhoFunction& rho,
                                         const std::vector<double>& ys, const std::vector<double>& ts) {
  TimeInvarianceReport report;
  for (double y : ys) {
    for (double t0 : ts) {
      for (double t : ts) {
        const double lhs = beta(beta(y, t0), t);
        const double rhs = beta(y, t0 + t);
        if (std::abs(lhs - rhs) > 1e-10 * (1.0 + y)) {
          report.passed = false;
          report.semigroup_violation = std::array<double, 3>{y, t0, t};
          report.message = fmt::format("beta(beta({0},{1}),{2}) = {3} but beta({0},{1}+{2}) = {4}", y, t0, t,
                                       lhs, rhs);
          return report;
        }
      }
    }
  }
  if (rho) {
    for (double y : ys) {
      const double r = rho(y);
      // Richardson-style shrinking: accept once the forward difference
      // settles within tolerance.
      bool ok = false;
      double last = 0.0;
      for (double h = 1e-3; h >= 1e-9; h *= 0.1) {
        last = (beta(y, h) - y) / h;
        if (std::abs(last - r) <= 1e-4 * std::max(1.0, std::abs(r))) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        report.passed = false;
        report.rho_violation = y;
        report.message = fmt::format("forward difference {} does not approach rho({}) = {}", last, y, r);
        return report;
      }
    }
  }
  return report;
}

TimeInvarianceReport CheckTimeInvariance(const BetaFamily& fam, const std::vector<double>& ys,
                                         const std::vector<double>& ts) {
  return CheckTimeInvariance([&fam](double y, double t) { return Beta(fam, y, t); },
                             [&fam](double y) { return Rho(fam, y); }, ys, ts);
}

double DefaultPointwiseSlack(const BetaFamily& fam, double alpha0) {
  return fam.kind == BetaKind::kFiniteTime ? 1e-9 * alpha0 : 0.0;
}

PointwiseBoundResult PointwiseBound(const BetaFamily& fam, const AlphaMeasure& alpha, double M, double k,
                                    const Trajectory& traj, std::optional<double> slack) {
  PointwiseBoundResult result;
  if (traj.size() == 0) return result;
  const double a0 = alpha(traj.states.front());
  const double tol = slack.value_or(DefaultPointwiseSlack(fam, a0));
  const double t0 = traj.times.front();
  for (std::size_t j = 0; j < traj.size(); ++j) {
    const double t = traj.times[j] - t0;
    const double bound = M * Beta(fam, a0, k * t);
    const double margin = alpha(traj.states[j]) - bound;
    if (margin > result.worst_margin) {
      result.worst_margin = margin;
      result.worst_time = t;
    }
    if (margin > kPointwiseRelTol * bound + tol) result.holds = false;
  }
  return result;
}

}  // namespace ratecert
