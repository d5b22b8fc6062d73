#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ratecert/beta.h"
#include "ratecert/polynomial.h"
#include "ratecert/signed_power.h"
#include "ratecert/trajectory.h"

namespace ratecert {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

VectorField MakeVectorField(const PolyVectorField& f);
VectorField MakeVectorField(const std::vector<SignedPowerExpr>& f);

/// The step size fell below the resolution of the time variable, or the
/// state left the finite range; usually finite escape.
class StepSizeUnderflow : public std::runtime_error {
 public:
  StepSizeUnderflow(double time, const std::string& reason);
  double time() const { return time_; }

 private:
  double time_;
};

class NotSettled : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Called at every accepted sample (including t = 0); returning false stops
/// the integration after that sample.
using SampleObserver = std::function<bool(double t, const Eigen::VectorXd& x)>;

struct IntegrationOptions {
  double rel_tol = 1e-6;
  double abs_tol = 1e-9;
  /// Zero picks the first step from the field magnitude.
  double initial_step = 0.0;
  long max_steps = 20'000'000;
  /// States with a larger 2-norm count as escape.
  double blowup_norm = 1e100;
  /// When false only the first and last samples are stored.
  bool keep_samples = true;
  SampleObserver observer;
};

/// Bogacki-Shampine 2(3) pair with local error per step at most
/// rel_tol |x|_inf + abs_tol; dense output via Trajectory::StateAt.
/// Throws StepSizeUnderflow, or std::runtime_error when the step budget runs out.
Trajectory Integrate(const VectorField& f, const Eigen::VectorXd& x0, double t_end,
                     const IntegrationOptions& options = {});

/// Integrates every initial condition with up to `jobs` threads; the output
/// order matches `ics`. The first failure in `ics` order is rethrown.
std::vector<Trajectory> IntegrateAll(const VectorField& f, const std::vector<Eigen::VectorXd>& ics, double t_end,
                                     const IntegrationOptions& options, int jobs);

/// (ln|x(t0)|_2 - ln|x(t1)|_2) / (t1 - t0) from the dense output.
double AverageLogSlope(const Trajectory& traj, double t0, double t1);

/// First time alpha(x(t)) <= threshold, linearly interpolated between samples;
/// the default threshold is 1e-9 alpha(x0). Throws NotSettled.
double SettlingTime(const Trajectory& traj, const AlphaMeasure& alpha,
                    std::optional<double> threshold = std::nullopt);

/// Points on the sphere |x|_2 = radius: +-radius in 1-D, uniform angles in 2-D,
/// a Fibonacci lattice in 3-D and normalized Gaussian directions from `seed`
/// for n > 3.
std::vector<Eigen::VectorXd> SphereInitialConditions(int n, int count, double radius,
                                                     unsigned long long seed = 0);
/// Uniform samples in the ball |x|_2 <= radius.
std::vector<Eigen::VectorXd> BallInitialConditions(int n, int count, double radius, unsigned long long seed);

/// Largest k >= 0 with alpha <= M beta(alpha0, k t) (1 + kPointwiseRelTol) + slack at one sample
/// (the bound is monotone in k, so this is the limit of bisection); +inf when
/// the sample does not constrain k and a negative value when it fails at k = 0.
double SampleRateBound(const BetaFamily& family, double M, double alpha0, double alpha, double t, double slack);

struct RateEstimate {
  double k_sim = 0.0;
  double M = 1.0;
  BetaFamily family;
  double horizon = 0.0;
  int num_ics = 0;
  std::string ic_rule;
  /// Initial condition and time of the binding sample.
  int worst_ic = -1;
  double worst_time = 0.0;
  /// The bound fails at k = k_lo (the gain M is violated); k_sim is then k_lo.
  bool gain_violated = false;
};

struct RateEstimateOptions {
  double k_lo = 0.0;
  /// Upper cap on the estimate; zero leaves it uncapped.
  double k_hi = 0.0;
  IntegrationOptions integration;
  int jobs = 1;
  /// Additive slack of the pointwise test; negative selects
  /// DefaultPointwiseSlack.
  double slack = -1.0;
};

/// Largest k such that alpha(x(t)) <= M beta(alpha(x0), k t) holds at every
/// sample of every trajectory over [0, horizon].
RateEstimate EstimateRate(const VectorField& f, const BetaFamily& family, const AlphaMeasure& alpha, double M,
                          const std::vector<Eigen::VectorXd>& ics, double horizon,
                          const RateEstimateOptions& options = {});

/// Same estimate on stored trajectories.
RateEstimate EstimateRate(const std::vector<Trajectory>& trajectories, const BetaFamily& family,
                          const AlphaMeasure& alpha, double M, const RateEstimateOptions& options = {});

struct SettlingRateEstimate {
  /// min over initial conditions of alpha(x0) / T(x0).
  double k_sim = 0.0;
  int worst_ic = -1;
  std::vector<double> settling_times;
};

/// Finite-time protocol: every trajectory must reach alpha <= 1e-9 alpha(x0)
/// within the horizon (NotSettled otherwise). Integration uses relative error
/// control only, so that the approach to the origin is resolved.
SettlingRateEstimate EstimateSettlingRate(const VectorField& f, const AlphaMeasure& alpha,
                                          const std::vector<Eigen::VectorXd>& ics, double horizon,
                                          const RateEstimateOptions& options = {});

struct ConverseOptions {
  double horizon = 100.0;
  int grid = 400;
  double epsilon = 0.0;
  IntegrationOptions integration;
};

/// Numerical converse Lyapunov function
///   V(x) = sup_t beta(alpha1(phi(x, t)), -(1 - epsilon) k t)
/// over t = 0 and a log-spaced grid (truncated at the settling time for
/// finite-time families), refined by golden-section search around the coarse
/// maximizer. Returns +inf when the negative-time extension escapes.
/// Integration uses relative error control only: alpha(phi(x, t)) is
/// multiplied by the growing negative-time factor, so it must be accurate
/// relative to its own size.
double ConverseLyapunovSample(const VectorField& f, const BetaFamily& family, const AlphaMeasure& alpha1, double k,
                              const Eigen::VectorXd& x, const ConverseOptions& options = {});

/// Writes a "t,x1,..,xn,alpha" header and one row per sample.
void WriteTrajectoryCsv(const Trajectory& traj, const AlphaMeasure& alpha, std::ostream& out);

}  // namespace ratecert
