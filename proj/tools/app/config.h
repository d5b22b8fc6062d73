#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratecert/beta.h"
#include "ratecert/parser.h"
#include "ratecert/stability.h"

namespace ratecert::app {

/// Invalid or inconsistent run configuration (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulateSettings {
  /// "sphere", "ball" or "points".
  std::string ics = "sphere";
  int count = 200;
  double radius = 1.0;
  std::vector<std::vector<double>> points;
  double horizon = 100.0;
  double gain = 1.0;
  /// Empty selects the family of the analysis condition.
  std::string family;
  /// "two_norm" (|x|_2^exponent) or "quasi_norm" ((sum |x_i|^p)^(eta/p));
  /// empty pairs the measure with the family.
  std::string alpha;
  double alpha_exponent = 1.0;
  double alpha_p = 2.0;
  double alpha_eta = 1.0;
  /// "pointwise" (largest k with the bound at every sample) or "settling"
  /// (min alpha(x0) / T(x0)); empty picks settling for finite-time families.
  std::string estimator;
  double rel_tol = 1e-6;
  double abs_tol = 1e-9;
  bool dump_worst = true;
};

struct RegionSettings {
  std::vector<double> k;
  double radius_lo = 0.05;
  double radius_hi = 2.0;
  double radius_rel_tol = 1e-2;
  int resolution = 720;
  int boundary_samples = 10000;
  int invariance_samples = 2000;
  int soundness_samples = 500;
  int nesting_samples = 500;
};

/// A parsed and validated run configuration.
struct RunConfig {
  std::string source_path;
  std::string system_file;
  ParsedSystem system;

  std::optional<Condition> condition;
  int d = 1;
  int r = 2;
  int p = 2;
  Rational eta{1, 2};
  std::vector<int> h_exponents;
  double fixed_gain = 0.0;
  double k_lo = 0.0;
  double k_hi = 0.0;
  double k_rel_tol = 1e-3;
  bool minimize_gain = true;
  int soundness_samples = 1000;

  /// Domain template over x1..xn and R; empty uses the system's constraints
  /// (or the ball of radius R when a radius sweep is present).
  std::string domain_template;

  std::vector<int> sweep_d;
  std::vector<double> sweep_radius;

  SimulateSettings simulate;
  RegionSettings region;

  std::uint64_t seed = 0;
  int jobs = 0;
  std::string out_dir = "ratecert_out";
  bool wall_time = true;

  /// Domain for a sweep radius (the system's own domain when radius <= 0).
  SemialgebraicSet DomainFor(double radius) const;
  /// Analysis spec for one sweep point; throws ConfigError without a condition.
  AnalysisSpec SpecFor(int d, double radius) const;
  BetaFamily SimulationFamily() const;
  AlphaMeasure SimulationAlpha() const;
  bool UsesSettlingEstimator() const;
};

/// Reads an INI-style file of [section] key = value lines; every key is
/// checked against the schema before anything is solved. Throws ConfigError.
RunConfig LoadConfig(const std::string& path);
/// Same, from text; relative system paths resolve against `base_dir`.
RunConfig ParseConfig(const std::string& text, const std::string& base_dir);

}  // namespace ratecert::app
