#include "ratecert/simulate.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "ratecert/parallel.h"

namespace ratecert {

namespace {

using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
// Absolute tolerance for runs that must resolve the approach to the origin
// down to the settling threshold; any larger floor lets the state chatter
// around zero at the floor's level.
constexpr double kRelativeOnly = 1e-300;

double InfNorm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

VectorField MakeVectorField(const PolyVectorField& f) {
  return [f](const VectorXd& x) { return f.Evaluate(x); };
}

VectorField MakeVectorField(const std::vector<SignedPowerExpr>& f) {
  return [f](const VectorXd& x) {
    VectorXd v = EvaluateField(f, x);
    // Negative powers of |x_i| at x_i = 0 are taken as 0.
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v(i))) v(i) = 0.0;
    }
    return v;
  };
}

StepSizeUnderflow::StepSizeUnderflow(double time, const std::string& reason)
    : std::runtime_error(fmt::format("integration failed at t = {}: {}", time, reason)), time_(time) {}

VectorXd Trajectory::StateAt(double t) const {
  if (times.empty()) throw std::logic_error("StateAt on an empty trajectory");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times.begin());
  const double t0 = times[j - 1];
  const double h = times[j] - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  if (derivatives.size() != times.size()) {
    return (1.0 - s) * states[j - 1] + s * states[j];
  }
  return h00 * states[j - 1] + h10 * h * derivatives[j - 1] + h01 * states[j] + h11 * h * derivatives[j];
}

Trajectory Integrate(const VectorField& f, const VectorXd& x0, double t_end, const IntegrationOptions& options) {
  if (!(options.rel_tol > 0.0) || !(options.abs_tol > 0.0)) {
    throw std::invalid_argument("integration tolerances must be positive");
  }
  if (!(t_end >= 0.0)) throw std::invalid_argument("integration end time must be nonnegative");
  Trajectory traj;
  double t = 0.0;
  VectorXd x = x0;
  VectorXd k1 = f(x);
  auto record = [&](double tt, const VectorXd& xx, const VectorXd& dx, bool force) {
    if (options.keep_samples || force || traj.times.empty()) {
      traj.times.push_back(tt);
      traj.states.push_back(xx);
      traj.derivatives.push_back(dx);
    }
  };
  record(t, x, k1, true);
  if (options.observer && !options.observer(t, x)) return traj;
  if (t_end == 0.0) return traj;

  double h = options.initial_step;
  if (!(h > 0.0)) {
    const double fn = InfNorm(k1);
    const double scale = options.rel_tol * InfNorm(x) + options.abs_tol;
    h = fn > 0.0 ? 0.5 * std::cbrt(options.rel_tol) * std::max(InfNorm(x), scale) / fn : t_end;
  }
  h = std::min(h, t_end);
  long steps = 0;
  bool stored_last = true;
  while (t < t_end) {
    if (++steps > options.max_steps) {
      throw std::runtime_error(fmt::format("step budget of {} exhausted at t = {}", options.max_steps, t));
    }
    if (t + h > t_end) h = t_end - t;
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::abs(t) || h < 1e-300) {
      throw StepSizeUnderflow(t, fmt::format("step size {} underflows", h));
    }
    const VectorXd k2 = f(x + 0.5 * h * k1);
    const VectorXd k3 = f(x + 0.75 * h * k2);
    const VectorXd x_new = x + h * ((2.0 / 9.0) * k1 + (1.0 / 3.0) * k2 + (4.0 / 9.0) * k3);
    const VectorXd k4 = f(x_new);
    const VectorXd err = h * ((-5.0 / 72.0) * k1 + (1.0 / 12.0) * k2 + (1.0 / 9.0) * k3 - 0.125 * k4);
    const double tol = options.rel_tol * std::max(InfNorm(x), InfNorm(x_new)) + options.abs_tol;
    const double err_norm = InfNorm(err);
    if (!std::isfinite(err_norm) || !x_new.allFinite()) {
      ++traj.stats.rejected;
      h *= 0.25;
      continue;
    }
    const double ratio = err_norm / tol;
    if (ratio <= 1.0) {
      t = (t + h >= t_end) ? t_end : t + h;
      x = x_new;
      k1 = k4;
      ++traj.stats.accepted;
      traj.stats.max_error_estimate = std::max(traj.stats.max_error_estimate, err_norm);
      if (x.norm() > options.blowup_norm) throw StepSizeUnderflow(t, "state norm exceeds the blow-up bound");
      const bool stop = options.observer && !options.observer(t, x);
      record(t, x, k1, stop || t >= t_end);
      stored_last = options.keep_samples || stop || t >= t_end;
      if (stop) break;
    } else {
      ++traj.stats.rejected;
    }
    const double factor = ratio > 0.0 ? 0.9 * std::pow(ratio, -1.0 / 3.0) : 5.0;
    h *= std::clamp(factor, 0.2, 5.0);
  }
  if (!stored_last) record(t, x, k1, true);
  return traj;
}

std::vector<Trajectory> IntegrateAll(const VectorField& f, const std::vector<VectorXd>& ics, double t_end,
                                     const IntegrationOptions& options, int jobs) {
  std::vector<Trajectory> out(ics.size());
  ParallelFor(static_cast<int>(ics.size()), jobs,
              [&](int i) { out[static_cast<std::size_t>(i)] = Integrate(f, ics[static_cast<std::size_t>(i)], t_end, options); });
  return out;
}

double AverageLogSlope(const Trajectory& traj, double t0, double t1) {
  if (!(t1 > t0)) throw std::invalid_argument("log-slope interval is empty");
  if (t1 > traj.t_end() + 1e-12) throw std::invalid_argument("log-slope interval exceeds the trajectory");
  return (std::log(traj.StateAt(t0).norm()) - std::log(traj.StateAt(t1).norm())) / (t1 - t0);
}

double SettlingTime(const Trajectory& traj, const AlphaMeasure& alpha, std::optional<double> threshold) {
  if (traj.size() == 0) throw std::invalid_argument("empty trajectory");
  const double a0 = alpha(traj.states.front());
  if (a0 == 0.0) return traj.times.front();
  const double thr = threshold.value_or(1e-9 * a0);
  double prev = a0;
  for (std::size_t j = 1; j < traj.size(); ++j) {
    const double a = alpha(traj.states[j]);
    if (a <= thr) {
      const double s = (prev - thr) / (prev - a);
      return traj.times[j - 1] + s * (traj.times[j] - traj.times[j - 1]);
    }
    prev = a;
  }
  throw NotSettled(fmt::format("alpha stays above {} up to t = {}", thr, traj.t_end()));
}

std::vector<VectorXd> SphereInitialConditions(int n, int count, double radius, unsigned long long seed) {
  if (n < 1 || count < 1) throw std::invalid_argument("need a positive dimension and count");
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  if (n == 1) {
    for (int i = 0; i < count; ++i) out.push_back(VectorXd::Constant(1, i % 2 == 0 ? radius : -radius));
  } else if (n == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * i / count;
      VectorXd x(2);
      x << radius * std::cos(a), radius * std::sin(a);
      out.push_back(x);
    }
  } else if (n == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / count;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      VectorXd x(3);
      x << rho * std::cos(phi), rho * std::sin(phi), z;
      out.push_back(radius * x);
    }
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int i = 0; i < count; ++i) {
      VectorXd x(n);
      do {
        for (int j = 0; j < n; ++j) x(j) = normal(rng);
      } while (x.norm() == 0.0);
      out.push_back(radius * x / x.norm());
    }
  }
  return out;
}

std::vector<VectorXd> BallInitialConditions(int n, int count, double radius, unsigned long long seed) {
  if (n < 1 || count < 1) throw std::invalid_argument("need a positive dimension and count");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    VectorXd x(n);
    do {
      for (int j = 0; j < n; ++j) x(j) = normal(rng);
    } while (x.norm() == 0.0);
    const double r = radius * std::pow(unit(rng), 1.0 / n);
    out.push_back(r * x / x.norm());
  }
  return out;
}

double SampleRateBound(const BetaFamily& family, double M, double alpha0, double alpha, double t, double slack) {
  const double a = std::max(alpha - slack, 0.0);
  if (a <= 0.0) return kInf;
  // Need beta(alpha0, k t) >= target; the few-ulp bump keeps PointwiseBound
  // at the returned k on the passing side of rounding.
  const double target = a / (M * (1.0 + kPointwiseRelTol)) * (1.0 + 16.0 * std::numeric_limits<double>::epsilon());
  if (t <= 0.0) return target <= alpha0 ? kInf : -1.0;
  switch (family.kind) {
    case BetaKind::kExponential:
      return std::log(alpha0 / target) / t;
    case BetaKind::kRational:
      return (alpha0 / target - 1.0) / (alpha0 * t);
    case BetaKind::kFiniteTime:
      return (alpha0 - target) / t;
  }
  throw std::logic_error("SampleRateBound: unknown family");
}

namespace {

struct TrajectoryBound {
  double k = kInf;
  double time = 0.0;
};

// Observer that folds per-sample rate bounds into a running minimum.
class BoundTracker {
 public:
  BoundTracker(const BetaFamily& fam, const AlphaMeasure& alpha, double M, double slack)
      : fam_(fam), alpha_(alpha), M_(M), slack_(slack) {}

  void Observe(double t, const VectorXd& x) {
    const double a = alpha_(x);
    if (first_) {
      first_ = false;
      a0_ = a;
      slack_used_ = slack_ >= 0.0 ? slack_ : DefaultPointwiseSlack(fam_, a0_);
      t0_ = t;
    }
    const double k = SampleRateBound(fam_, M_, a0_, a, t - t0_, slack_used_);
    if (k < bound_.k) bound_ = {k, t - t0_};
  }
  TrajectoryBound bound() const { return bound_; }

 private:
  BetaFamily fam_;
  AlphaMeasure alpha_;
  double M_;
  double slack_;
  double slack_used_ = 0.0;
  bool first_ = true;
  double a0_ = 0.0;
  double t0_ = 0.0;
  TrajectoryBound bound_;
};

RateEstimate Combine(const std::vector<TrajectoryBound>& bounds, const BetaFamily& family, double M,
                     const RateEstimateOptions& options) {
  RateEstimate est;
  est.family = family;
  est.M = M;
  est.num_ics = static_cast<int>(bounds.size());
  double k = kInf;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (bounds[i].k < k) {
      k = bounds[i].k;
      est.worst_ic = static_cast<int>(i);
      est.worst_time = bounds[i].time;
    }
  }
  if (k < options.k_lo) {
    est.gain_violated = true;
    est.k_sim = options.k_lo;
  } else {
    est.k_sim = options.k_hi > 0.0 ? std::min(k, options.k_hi) : k;
  }
  return est;
}

}  // namespace

RateEstimate EstimateRate(const VectorField& f, const BetaFamily& family, const AlphaMeasure& alpha, double M,
                          const std::vector<VectorXd>& ics, double horizon, const RateEstimateOptions& options) {
  if (!(M >= 1.0)) throw std::invalid_argument("the gain must be at least 1");
  std::vector<TrajectoryBound> bounds(ics.size());
  ParallelFor(static_cast<int>(ics.size()), options.jobs, [&](int i) {
    BoundTracker tracker(family, alpha, M, options.slack);
    IntegrationOptions io = options.integration;
    io.keep_samples = false;
    io.observer = [&](double t, const VectorXd& x) {
      tracker.Observe(t, x);
      return true;
    };
    Integrate(f, ics[static_cast<std::size_t>(i)], horizon, io);
    bounds[static_cast<std::size_t>(i)] = tracker.bound();
  });
  RateEstimate est = Combine(bounds, family, M, options);
  est.horizon = horizon;
  return est;
}

RateEstimate EstimateRate(const std::vector<Trajectory>& trajectories, const BetaFamily& family,
                          const AlphaMeasure& alpha, double M, const RateEstimateOptions& options) {
  if (!(M >= 1.0)) throw std::invalid_argument("the gain must be at least 1");
  std::vector<TrajectoryBound> bounds;
  double horizon = 0.0;
  for (const auto& traj : trajectories) {
    BoundTracker tracker(family, alpha, M, options.slack);
    for (std::size_t j = 0; j < traj.size(); ++j) tracker.Observe(traj.times[j], traj.states[j]);
    bounds.push_back(tracker.bound());
    horizon = std::max(horizon, traj.t_end());
  }
  RateEstimate est = Combine(bounds, family, M, options);
  est.horizon = horizon;
  return est;
}

SettlingRateEstimate EstimateSettlingRate(const VectorField& f, const AlphaMeasure& alpha,
                                          const std::vector<VectorXd>& ics, double horizon,
                                          const RateEstimateOptions& options) {
  SettlingRateEstimate est;
  est.settling_times.assign(ics.size(), 0.0);
  ParallelFor(static_cast<int>(ics.size()), options.jobs, [&](int i) {
    const VectorXd& x0 = ics[static_cast<std::size_t>(i)];
    const double thr = 1e-9 * alpha(x0);
    IntegrationOptions io = options.integration;
    io.abs_tol = kRelativeOnly;
    io.observer = [&](double, const VectorXd& x) { return alpha(x) > thr; };
    const Trajectory traj = Integrate(f, x0, horizon, io);
    est.settling_times[static_cast<std::size_t>(i)] = SettlingTime(traj, alpha, thr);
  });
  est.k_sim = kInf;
  for (std::size_t i = 0; i < ics.size(); ++i) {
    const double T = est.settling_times[i];
    const double k = T > 0.0 ? alpha(ics[i]) / T : kInf;
    if (k < est.k_sim) {
      est.k_sim = k;
      est.worst_ic = static_cast<int>(i);
    }
  }
  return est;
}

double ConverseLyapunovSample(const VectorField& f, const BetaFamily& family, const AlphaMeasure& alpha1, double k,
                              const VectorXd& x, const ConverseOptions& options) {
  if (options.grid < 2) throw std::invalid_argument("converse grid needs at least two points");
  const double a0 = alpha1(x);
  if (a0 == 0.0) return 0.0;
  IntegrationOptions io = options.integration;
  io.abs_tol = kRelativeOnly;
  double t_max = options.horizon;
  if (family.kind == BetaKind::kFiniteTime) {
    const double thr = 1e-9 * a0;
    io.observer = [&](double, const VectorXd& s) { return alpha1(s) > thr; };
  }
  const Trajectory traj = Integrate(f, x, options.horizon, io);
  if (family.kind == BetaKind::kFiniteTime) {
    try {
      t_max = SettlingTime(traj, alpha1);
    } catch (const NotSettled&) {
      t_max = traj.t_end();
    }
  }
  const double rate = (1.0 - options.epsilon) * k;
  auto value = [&](double t) { return BetaNeg(family, alpha1(traj.StateAt(t)), rate * t); };

  std::vector<double> grid{0.0};
  const double t_min = t_max * 1e-6;
  for (int i = 0; i < options.grid - 1; ++i) {
    grid.push_back(t_min * std::pow(t_max / t_min, static_cast<double>(i) / (options.grid - 2)));
  }
  std::size_t best = 0;
  double best_value = value(0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = value(grid[i]);
    if (std::isinf(v)) return kInf;
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  // Golden-section refinement on the neighbouring grid cells.
  double lo = grid[best == 0 ? 0 : best - 1];
  double hi = grid[std::min(best + 1, grid.size() - 1)];
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - g * (hi - lo);
  double d = lo + g * (hi - lo);
  double fc = value(c);
  double fd = value(d);
  for (int it = 0; it < 60 && hi - lo > 1e-12 * (1.0 + hi); ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = value(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = value(d);
    }
  }
  return std::max({best_value, fc, fd});
}

void WriteTrajectoryCsv(const Trajectory& traj, const AlphaMeasure& alpha, std::ostream& out) {
  const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << (i + 1);
  out << ",alpha\n";
  for (std::size_t j = 0; j < traj.size(); ++j) {
    out << fmt::format("{:.17g}", traj.times[j]);
    for (Eigen::Index i = 0; i < n; ++i) out << fmt::format(",{:.17g}", traj.states[j](i));
    out << fmt::format(",{:.17g}\n", alpha(traj.states[j]));
  }
}

}  // namespace ratecert
