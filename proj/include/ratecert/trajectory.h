#pragma once

#include <vector>

#include <Eigen/Dense>

namespace ratecert {

/// Sampled solution of x' = f(x) with derivatives at the samples, enough for
/// cubic Hermite dense output between consecutive steps.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> derivatives;

  struct Stats {
    int accepted = 0;
    int rejected = 0;
    double max_error_estimate = 0.0;
  } stats;

  std::size_t size() const { return times.size(); }
  double t_end() const { return times.empty() ? 0.0 : times.back(); }

  /// Cubic Hermite interpolation; t is clamped to [times.front(), times.back()].
  Eigen::VectorXd StateAt(double t) const;
};

}  // namespace ratecert
