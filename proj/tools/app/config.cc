#include "app/config.h"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace ratecert::app {

namespace {

namespace fs = std::filesystem;
using boost::property_tree::ptree;

enum class ValueType { kInt, kUInt64, kDouble, kBool, kString, kRational, kIntList, kDoubleList, kPointList };

// Every accepted "section.key" and its value type.
const std::map<std::string, ValueType>& Schema() {
  static const std::map<std::string, ValueType> schema = {
      {"system.file", ValueType::kString},
      {"analysis.condition", ValueType::kString},
      {"analysis.d", ValueType::kInt},
      {"analysis.r", ValueType::kInt},
      {"analysis.p", ValueType::kInt},
      {"analysis.eta", ValueType::kRational},
      {"analysis.h", ValueType::kIntList},
      {"analysis.gain", ValueType::kDouble},
      {"analysis.k_lo", ValueType::kDouble},
      {"analysis.k_hi", ValueType::kDouble},
      {"analysis.rel_tol", ValueType::kDouble},
      {"analysis.minimize_gain", ValueType::kBool},
      {"analysis.soundness_samples", ValueType::kInt},
      {"domain.template", ValueType::kString},
      {"sweep.d", ValueType::kIntList},
      {"sweep.radius", ValueType::kDoubleList},
      {"simulate.ics", ValueType::kString},
      {"simulate.count", ValueType::kInt},
      {"simulate.radius", ValueType::kDouble},
      {"simulate.points", ValueType::kPointList},
      {"simulate.horizon", ValueType::kDouble},
      {"simulate.gain", ValueType::kDouble},
      {"simulate.family", ValueType::kString},
      {"simulate.alpha", ValueType::kString},
      {"simulate.alpha_exponent", ValueType::kDouble},
      {"simulate.alpha_p", ValueType::kRational},
      {"simulate.alpha_eta", ValueType::kRational},
      {"simulate.estimator", ValueType::kString},
      {"simulate.rel_tol", ValueType::kDouble},
      {"simulate.abs_tol", ValueType::kDouble},
      {"simulate.dump_worst", ValueType::kBool},
      {"region.k", ValueType::kDoubleList},
      {"region.radius_lo", ValueType::kDouble},
      {"region.radius_hi", ValueType::kDouble},
      {"region.radius_rel_tol", ValueType::kDouble},
      {"region.resolution", ValueType::kInt},
      {"region.boundary_samples", ValueType::kInt},
      {"region.invariance_samples", ValueType::kInt},
      {"region.soundness_samples", ValueType::kInt},
      {"region.nesting_samples", ValueType::kInt},
      {"run.seed", ValueType::kUInt64},
      {"run.jobs", ValueType::kInt},
      {"output.dir", ValueType::kString},
      {"output.wall_time", ValueType::kBool},
  };
  return schema;
}

template <typename T>
T ParseNumber(const std::string& key, std::string text) {
  boost::trim(text);
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, text));
  }
  return value;
}

bool ParseBool(const std::string& key, std::string text) {
  boost::trim(text);
  boost::to_lower(text);
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, text));
}

Rational ParseRational(const std::string& key, std::string text) {
  boost::trim(text);
  const auto slash = text.find('/');
  if (slash == std::string::npos) return Rational(ParseNumber<long long>(key, text));
  const long long den = ParseNumber<long long>(key, text.substr(slash + 1));
  if (den == 0) throw ConfigError(fmt::format("{}: zero denominator", key));
  return Rational(ParseNumber<long long>(key, text.substr(0, slash)), den);
}

std::vector<std::string> SplitList(const std::string& key, const std::string& text, const char* separators) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(separators));
  for (auto& p : parts) boost::trim(p);
  if (parts.size() == 1 && parts[0].empty()) throw ConfigError(fmt::format("{}: the list is empty", key));
  for (const auto& p : parts) {
    if (p.empty()) throw ConfigError(fmt::format("{}: empty list entry", key));
  }
  return parts;
}

template <typename T>
std::vector<T> ParseList(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& part : SplitList(key, text, ",")) out.push_back(ParseNumber<T>(key, part));
  return out;
}

std::vector<std::vector<double>> ParsePoints(const std::string& key, const std::string& text) {
  std::vector<std::vector<double>> out;
  for (const auto& point : SplitList(key, text, ";")) out.push_back(ParseList<double>(key, point));
  return out;
}

// Checks every entry against the schema and its type.
void CheckSchema(const ptree& tree) {
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(fmt::format("key '{}' appears outside a [section]", section));
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = Schema().find(full);
      if (it == Schema().end()) throw ConfigError(fmt::format("unknown configuration key '{}'", full));
      const std::string& text = value.data();
      switch (it->second) {
        case ValueType::kInt:
          ParseNumber<int>(full, text);
          break;
        case ValueType::kUInt64:
          ParseNumber<std::uint64_t>(full, text);
          break;
        case ValueType::kDouble:
          ParseNumber<double>(full, text);
          break;
        case ValueType::kBool:
          ParseBool(full, text);
          break;
        case ValueType::kString:
          if (boost::trim_copy(text).empty()) throw ConfigError(fmt::format("{}: empty value", full));
          break;
        case ValueType::kRational:
          ParseRational(full, text);
          break;
        case ValueType::kIntList:
          ParseList<int>(full, text);
          break;
        case ValueType::kDoubleList:
          ParseList<double>(full, text);
          break;
        case ValueType::kPointList:
          ParsePoints(full, text);
          break;
      }
    }
  }
}

class Reader {
 public:
  explicit Reader(const ptree& tree) : tree_(tree) {}

  std::optional<std::string> Raw(const std::string& key) const {
    const auto v = tree_.get_optional<std::string>(ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    return boost::trim_copy(*v);
  }
  bool Has(const std::string& key) const { return Raw(key).has_value(); }

  template <typename T>
  void Number(const std::string& key, T& target) const {
    if (auto v = Raw(key)) target = ParseNumber<T>(key, *v);
  }
  void Bool(const std::string& key, bool& target) const {
    if (auto v = Raw(key)) target = ParseBool(key, *v);
  }
  void String(const std::string& key, std::string& target) const {
    if (auto v = Raw(key)) target = *v;
  }

 private:
  const ptree& tree_;
};

void RequireOneOf(const std::string& key, const std::string& value, const std::set<std::string>& allowed) {
  if (!allowed.contains(value)) {
    throw ConfigError(fmt::format("{}: '{}' must be one of {}", key, value, fmt::join(allowed, ", ")));
  }
}

void RequirePositive(const std::string& key, double value) {
  if (!(value > 0.0)) throw ConfigError(fmt::format("{} must be positive", key));
}

}  // namespace

SemialgebraicSet RunConfig::DomainFor(double radius) const {
  const int n = system.nvars;
  if (radius <= 0.0) return system.Domain();
  if (domain_template.empty()) return SemialgebraicSet::Ball(n, radius);
  std::vector<std::string> names = DefaultVariableNames(n);
  names.push_back("R");
  std::vector<Polynomial> subs;
  for (int i = 0; i < n; ++i) subs.push_back(Polynomial::Variable(n, i));
  subs.push_back(Polynomial(n, radius));
  std::vector<Polynomial> constraints;
  for (const auto& piece : SplitList("domain.template", domain_template, ";")) {
    constraints.push_back(ParsePolynomial(piece, names).Compose(subs));
  }
  return SemialgebraicSet(n, std::move(constraints));
}

AnalysisSpec RunConfig::SpecFor(int degree, double radius) const {
  if (!condition) throw ConfigError("analysis.condition is required for this command");
  AnalysisSpec spec;
  spec.condition = *condition;
  spec.field = system.field;
  spec.domain = DomainFor(radius);
  spec.d = degree;
  const bool rational = spec.condition == Condition::kRationalI || spec.condition == Condition::kRationalII;
  spec.r = rational ? 2 * degree : r;
  spec.p = p;
  spec.eta = eta;
  spec.h_exponents = h_exponents;
  spec.fixed_gain = fixed_gain;
  spec.bisection.k_lo = k_lo;
  spec.bisection.k_hi = k_hi;
  spec.bisection.rel_tol = k_rel_tol;
  return spec;
}

BetaFamily RunConfig::SimulationFamily() const {
  std::string name = simulate.family;
  if (name.empty()) {
    if (!condition) throw ConfigError("simulate.family or analysis.condition is required");
    switch (*condition) {
      case Condition::kExponential:
        name = "exponential";
        break;
      case Condition::kRationalI:
      case Condition::kRationalII:
        name = "rational";
        break;
      case Condition::kFiniteTime:
        name = "finite_time";
        break;
    }
  }
  if (name == "exponential") return BetaFamily::Exponential();
  if (name == "rational") return BetaFamily::RationalFamily(p);
  return BetaFamily::FiniteTime(simulate.alpha_p, simulate.alpha_eta);
}

AlphaMeasure RunConfig::SimulationAlpha() const {
  if (simulate.alpha == "two_norm") return AlphaMeasure::TwoNormPow(simulate.alpha_exponent);
  if (simulate.alpha == "quasi_norm") return AlphaMeasure::QuasiNormPow(simulate.alpha_p, simulate.alpha_eta);
  return AlphaMeasure::ForFamily(SimulationFamily());
}

bool RunConfig::UsesSettlingEstimator() const {
  if (!simulate.estimator.empty()) return simulate.estimator == "settling";
  return SimulationFamily().kind == BetaKind::kFiniteTime;
}

RunConfig ParseConfig(const std::string& text, const std::string& base_dir) {
  ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("config syntax error at line {}: {}", e.line(), e.message()));
  }
  CheckSchema(tree);
  const Reader rd(tree);
  RunConfig cfg;

  const auto file = rd.Raw("system.file");
  if (!file) throw ConfigError("system.file is required");
  fs::path sys_path(*file);
  if (sys_path.is_relative()) sys_path = fs::path(base_dir) / sys_path;
  if (!fs::exists(sys_path)) throw ConfigError(fmt::format("system file '{}' does not exist", sys_path.string()));
  cfg.system_file = sys_path.string();
  try {
    cfg.system = LoadSystemFile(cfg.system_file);
  } catch (const ParseError& e) {
    throw ConfigError(fmt::format("{}: {} (offset {})", cfg.system_file, e.message(), e.offset()));
  }
  const int n = cfg.system.nvars;

  if (auto c = rd.Raw("analysis.condition")) {
    RequireOneOf("analysis.condition", *c, {"exponential", "rational_i", "rational_ii", "finite_time"});
    cfg.condition = ConditionFromString(*c);
  }
  rd.Number("analysis.d", cfg.d);
  rd.Number("analysis.r", cfg.r);
  rd.Number("analysis.p", cfg.p);
  if (auto v = rd.Raw("analysis.eta")) cfg.eta = ParseRational("analysis.eta", *v);
  if (auto v = rd.Raw("analysis.h")) cfg.h_exponents = ParseList<int>("analysis.h", *v);
  rd.Number("analysis.gain", cfg.fixed_gain);
  rd.Number("analysis.k_lo", cfg.k_lo);
  rd.Number("analysis.k_hi", cfg.k_hi);
  rd.Number("analysis.rel_tol", cfg.k_rel_tol);
  rd.Bool("analysis.minimize_gain", cfg.minimize_gain);
  rd.Number("analysis.soundness_samples", cfg.soundness_samples);
  const bool rational =
      cfg.condition && (*cfg.condition == Condition::kRationalI || *cfg.condition == Condition::kRationalII);
  if (rational && rd.Has("analysis.r")) throw ConfigError("analysis.r follows from d (r = 2d) for rational conditions");

  rd.String("domain.template", cfg.domain_template);
  cfg.sweep_d = {cfg.d};
  if (auto v = rd.Raw("sweep.d")) cfg.sweep_d = ParseList<int>("sweep.d", *v);
  if (auto v = rd.Raw("sweep.radius")) {
    cfg.sweep_radius = ParseList<double>("sweep.radius", *v);
    for (double R : cfg.sweep_radius) RequirePositive("sweep.radius entries", R);
  }
  if (!cfg.domain_template.empty() && cfg.sweep_radius.empty() && !rd.Has("region.k")) {
    throw ConfigError("domain.template needs a radius sweep or a region search");
  }

  SimulateSettings& sim = cfg.simulate;
  rd.String("simulate.ics", sim.ics);
  RequireOneOf("simulate.ics", sim.ics, {"sphere", "ball", "points"});
  rd.Number("simulate.count", sim.count);
  rd.Number("simulate.radius", sim.radius);
  if (auto v = rd.Raw("simulate.points")) sim.points = ParsePoints("simulate.points", *v);
  rd.Number("simulate.horizon", sim.horizon);
  rd.Number("simulate.gain", sim.gain);
  rd.String("simulate.family", sim.family);
  if (!sim.family.empty()) RequireOneOf("simulate.family", sim.family, {"exponential", "rational", "finite_time"});
  rd.String("simulate.alpha", sim.alpha);
  if (!sim.alpha.empty()) RequireOneOf("simulate.alpha", sim.alpha, {"two_norm", "quasi_norm"});
  rd.Number("simulate.alpha_exponent", sim.alpha_exponent);
  if (auto v = rd.Raw("simulate.alpha_p")) sim.alpha_p = ToDouble(ParseRational("simulate.alpha_p", *v));
  if (auto v = rd.Raw("simulate.alpha_eta")) sim.alpha_eta = ToDouble(ParseRational("simulate.alpha_eta", *v));
  if (!rd.Has("simulate.alpha_eta") && cfg.condition == Condition::kFiniteTime) sim.alpha_eta = ToDouble(cfg.eta);
  rd.String("simulate.estimator", sim.estimator);
  if (!sim.estimator.empty()) RequireOneOf("simulate.estimator", sim.estimator, {"pointwise", "settling"});
  rd.Number("simulate.rel_tol", sim.rel_tol);
  rd.Number("simulate.abs_tol", sim.abs_tol);
  rd.Bool("simulate.dump_worst", sim.dump_worst);
  if (sim.count < 1) throw ConfigError("simulate.count must be positive");
  RequirePositive("simulate.radius", sim.radius);
  RequirePositive("simulate.horizon", sim.horizon);
  RequirePositive("simulate.rel_tol", sim.rel_tol);
  if (sim.gain < 1.0) throw ConfigError("simulate.gain must be at least 1");
  if (sim.ics == "points") {
    if (sim.points.empty()) throw ConfigError("simulate.ics = points needs simulate.points");
    for (const auto& pt : sim.points) {
      if (static_cast<int>(pt.size()) != n) {
        throw ConfigError(fmt::format("simulate.points: a point has {} entries for {} states", pt.size(), n));
      }
    }
  }

  RegionSettings& reg = cfg.region;
  if (auto v = rd.Raw("region.k")) reg.k = ParseList<double>("region.k", *v);
  rd.Number("region.radius_lo", reg.radius_lo);
  rd.Number("region.radius_hi", reg.radius_hi);
  rd.Number("region.radius_rel_tol", reg.radius_rel_tol);
  rd.Number("region.resolution", reg.resolution);
  rd.Number("region.boundary_samples", reg.boundary_samples);
  rd.Number("region.invariance_samples", reg.invariance_samples);
  rd.Number("region.soundness_samples", reg.soundness_samples);
  rd.Number("region.nesting_samples", reg.nesting_samples);
  if (!(reg.radius_lo > 0.0 && reg.radius_hi > reg.radius_lo)) {
    throw ConfigError("region.radius_lo and region.radius_hi must satisfy 0 < lo < hi");
  }
  for (int v : {reg.resolution, reg.boundary_samples, reg.invariance_samples, reg.soundness_samples,
                reg.nesting_samples}) {
    if (v < 1) throw ConfigError("region sample counts must be positive");
  }

  rd.Number("run.seed", cfg.seed);
  rd.Number("run.jobs", cfg.jobs);
  rd.String("output.dir", cfg.out_dir);
  rd.Bool("output.wall_time", cfg.wall_time);

  // Every sweep point must describe a valid analysis before anything runs.
  if (cfg.condition) {
    const std::vector<double> radii = cfg.sweep_radius.empty() ? std::vector<double>{0.0} : cfg.sweep_radius;
    for (int d : cfg.sweep_d) {
      for (double R : radii) {
        try {
          cfg.SpecFor(d, R).Validate();
        } catch (const ParseError& e) {
          throw ConfigError(fmt::format("domain.template: {}", e.message()));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(fmt::format("sweep point d = {}{}: {}", d, R > 0.0 ? fmt::format(", R = {}", R) : "",
                                        e.what()));
        }
      }
    }
  }
  return cfg;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig cfg = ParseConfig(buffer.str(), fs::path(path).parent_path().string());
  cfg.source_path = path;
  return cfg;
}

}  // namespace ratecert::app
