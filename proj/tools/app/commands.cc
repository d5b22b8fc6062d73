#include "app/commands.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "ratecert/parallel.h"
#include "ratecert/region.h"
#include "ratecert/simulate.h"

namespace ratecert::app {

namespace {

namespace fs = std::filesystem;
using Eigen::VectorXd;
using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Independent streams derived from the run seed.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

constexpr std::uint64_t kStreamIcs = 1;
constexpr std::uint64_t kStreamSoundness = 1000;
constexpr std::uint64_t kStreamRegion = 2000;
constexpr std::uint64_t kStreamNesting = 3000;

std::string Num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.10g}", v);
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void WriteFileAtomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Stored result of a sweep point when the file exists with the same params.
std::optional<json> LoadPoint(const fs::path& path, const json& params) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const json doc = json::parse(ReadFile(path.string()));
    if (doc.at("params") == params) return doc.at("result");
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

void StorePoint(const fs::path& path, const json& params, const json& result) {
  json doc;
  doc["params"] = params;
  doc["result"] = result;
  WriteFileAtomic(path, doc.dump(1) + "\n");
}

struct SweepPoint {
  int d = 1;
  double radius = 0.0;
  std::string key;
  std::string slug;
};

std::vector<SweepPoint> SweepPoints(const RunConfig& cfg) {
  const std::vector<double> radii = cfg.sweep_radius.empty() ? std::vector<double>{0.0} : cfg.sweep_radius;
  std::vector<SweepPoint> points;
  for (int d : cfg.sweep_d) {
    for (double R : radii) {
      SweepPoint p{d, R, fmt::format("d={}", d), fmt::format("d{}", d)};
      if (R > 0.0) {
        p.key += fmt::format(" R={}", R);
        p.slug += fmt::format("_R{}", R);
      }
      points.push_back(p);
    }
  }
  return points;
}

// Parameters that determine a sweep point's result.
json BaseParams(const RunConfig& cfg, const std::string& command) {
  json p;
  p["command"] = command;
  p["system"] = ReadFile(cfg.system_file);
  p["condition"] = cfg.condition ? ToString(*cfg.condition) : "";
  p["r"] = cfg.r;
  p["p"] = cfg.p;
  p["eta"] = ToString(cfg.eta);
  p["h"] = cfg.h_exponents;
  p["gain"] = cfg.fixed_gain;
  p["k_lo"] = cfg.k_lo;
  p["k_hi"] = cfg.k_hi;
  p["rel_tol"] = cfg.k_rel_tol;
  p["domain_template"] = cfg.domain_template;
  p["seed"] = cfg.seed;
  return p;
}

std::vector<std::string> DomainText(const SemialgebraicSet& dom) {
  std::vector<std::string> out;
  for (const auto& g : dom.constraints) out.push_back(g.ToString());
  return out;
}

int Worse(int a, int b) {
  auto rank = [](int code) { return code == kExitNumericalTrouble ? 3 : code == kExitInfeasibleAtKLo ? 2 : code; };
  return rank(a) >= rank(b) ? a : b;
}

// ---------------------------------------------------------------- analyze

json AnalyzePoint(const RunConfig& cfg, const SweepPoint& point, int index, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const AnalysisSpec spec = cfg.SpecFor(point.d, point.radius);
  json res;
  res["k_star"] = nullptr;
  res["gain"] = nullptr;
  try {
    const RateResult rate = BisectRate(spec);
    StabilityCertificate cert = rate.certificate;
    double gain = cert.gain;
    bool fallback = false;
    if (spec.condition == Condition::kRationalI) {
      gain = spec.fixed_gain;
    } else if (cfg.minimize_gain) {
      const GainResult g = MinimizeGain(spec, rate.k_star);
      gain = g.gain;
      cert = g.certificate;
      fallback = g.used_gain_bisection;
    }
    const SoundnessCheck sound =
        CheckCertificate(cert, cfg.soundness_samples, DeriveSeed(cfg.seed, kStreamSoundness + index));
    res["status"] = "ok";
    res["k_star"] = rate.k_star;
    res["k_infeasible"] = rate.k_infeasible;
    res["gain"] = gain;
    res["gain_from_bisection"] = fallback;
    res["tau"] = cert.tau;
    res["residual"] = cert.max_relative_residual;
    res["soundness"] = sound.passed;
    json history = json::array();
    for (const auto& h : rate.history) history.push_back({{"k", h.k}, {"status", ToString(h.status)}, {"tau", h.tau}});
    res["history"] = history;
    res["certificate"] = cert.ToJson(BuildProgram(spec, cert.k));
  } catch (const InfeasibleAtKLo& e) {
    res["status"] = "infeasible_at_k_lo";
    res["message"] = e.what();
  } catch (const NumericalTroubleError& e) {
    res["status"] = "numerical_trouble";
    res["message"] = e.what();
  }
  res["wall_time"] = cfg.wall_time ? Seconds(start) : 0.0;
  log << fmt::format("analyze {}: {}{}\n", point.key, res["status"].get<std::string>(),
                     res["k_star"].is_null() ? "" : fmt::format(" k* = {:.6g}", res["k_star"].get<double>()));
  return res;
}

int CodeOf(const json& res) {
  const std::string status = res.at("status").get<std::string>();
  if (status == "numerical_trouble") return kExitNumericalTrouble;
  if (status.rfind("infeasible", 0) == 0) return kExitInfeasibleAtKLo;
  return kExitOk;
}

double NumberOr(const json& j, const char* key, double fallback) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<double>();
}

// ---------------------------------------------------------------- simulate

struct IcOutcome {
  double k = kInf;
  double time = 0.0;
  bool gain_violated = false;
  std::string status = "ok";
  std::string message;
};

struct SimulationSummary {
  double k_sim = kNaN;
  int worst_ic = -1;
  double worst_time = 0.0;
  bool gain_violated = false;
  int failed = 0;
  int escaped = 0;
  std::vector<VectorXd> ics;
  std::vector<IcOutcome> outcomes;
  std::string ic_rule;
};

std::vector<VectorXd> InitialConditions(const RunConfig& cfg, double radius, std::string& rule) {
  const SimulateSettings& s = cfg.simulate;
  const int n = cfg.system.nvars;
  const std::uint64_t seed = DeriveSeed(cfg.seed, kStreamIcs);
  if (s.ics == "points") {
    rule = fmt::format("points count={}", s.points.size());
    std::vector<VectorXd> out;
    for (const auto& p : s.points) out.push_back(Eigen::Map<const VectorXd>(p.data(), n));
    return out;
  }
  rule = fmt::format("{} R={} count={}", s.ics, radius, s.count);
  if (s.ics == "ball") return BallInitialConditions(n, s.count, radius, seed);
  return SphereInitialConditions(n, s.count, radius, seed);
}

IntegrationOptions Integration(const RunConfig& cfg) {
  IntegrationOptions io;
  io.rel_tol = cfg.simulate.rel_tol;
  io.abs_tol = cfg.simulate.abs_tol;
  return io;
}

SimulationSummary Simulate(const RunConfig& cfg, double radius, double gain, int jobs) {
  SimulationSummary out;
  out.ics = InitialConditions(cfg, radius, out.ic_rule);
  const VectorField f = MakeVectorField(cfg.system.field);
  const BetaFamily fam = cfg.SimulationFamily();
  const AlphaMeasure alpha = cfg.SimulationAlpha();
  const bool settling = cfg.UsesSettlingEstimator();
  RateEstimateOptions opts;
  opts.integration = Integration(cfg);
  out.outcomes.resize(out.ics.size());
  ParallelFor(static_cast<int>(out.ics.size()), jobs, [&](int i) {
    IcOutcome& o = out.outcomes[static_cast<std::size_t>(i)];
    const std::vector<VectorXd> one{out.ics[static_cast<std::size_t>(i)]};
    try {
      if (settling) {
        const SettlingRateEstimate e = EstimateSettlingRate(f, alpha, one, cfg.simulate.horizon, opts);
        o.k = e.k_sim;
        o.time = e.settling_times[0];
      } else {
        const RateEstimate e = EstimateRate(f, fam, alpha, gain, one, cfg.simulate.horizon, opts);
        o.k = e.k_sim;
        o.time = e.worst_time;
        o.gain_violated = e.gain_violated;
      }
    } catch (const StepSizeUnderflow& e) {
      o.status = "escape";
      o.message = e.what();
      o.time = e.time();
    } catch (const NotSettled& e) {
      o.status = "not_settled";
      o.message = e.what();
    } catch (const std::runtime_error& e) {
      o.status = "failed";
      o.message = e.what();
    }
  });
  double k = kInf;
  for (std::size_t i = 0; i < out.outcomes.size(); ++i) {
    const IcOutcome& o = out.outcomes[i];
    if (o.status == "escape" && !settling) {
      // The bound fails for every k once the state escapes.
      ++out.escaped;
      out.gain_violated = true;
      continue;
    }
    if (o.status != "ok") {
      ++out.failed;
      continue;
    }
    out.gain_violated = out.gain_violated || o.gain_violated;
    if (o.k < k) {
      k = o.k;
      out.worst_ic = static_cast<int>(i);
      out.worst_time = o.time;
    }
  }
  out.k_sim = out.gain_violated ? 0.0 : (std::isfinite(k) ? k : kNaN);
  return out;
}

std::string FamilyName(const BetaFamily& fam) { return ToString(fam.kind); }

std::string AlphaName(const AlphaMeasure& a) {
  if (a.kind == AlphaMeasure::Kind::kTwoNormPow) return fmt::format("two_norm^{}", a.exponent);
  return fmt::format("quasi_norm(p={})^{}", a.p, a.eta);
}

// ---------------------------------------------------------------- region

DomainOfRadius RegionDomains(const RunConfig& cfg) {
  return [&cfg](double R) { return cfg.DomainFor(R); };
}

RegionOptions RegionOpts(const RunConfig& cfg, int index) {
  RegionOptions o;
  o.sublevel.samples_per_constraint = cfg.region.boundary_samples;
  o.sublevel.seed = DeriveSeed(cfg.seed, kStreamRegion + index);
  o.boundary_resolution = cfg.region.resolution;
  o.invariance_samples = cfg.region.invariance_samples;
  return o;
}

std::string KSlug(double k) { return fmt::format("{}", k); }

}  // namespace

RunConfig Resolve(RunConfig cfg, const Overrides& overrides) {
  if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.jobs) cfg.jobs = *overrides.jobs;
  if (cfg.jobs < 0) throw ConfigError("jobs must be nonnegative");
  if (cfg.jobs == 0) cfg.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return cfg;
}

int RunAnalyze(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.condition) throw ConfigError("analyze needs analysis.condition");
  const std::vector<SweepPoint> points = SweepPoints(cfg);
  const fs::path out(cfg.out_dir);
  std::vector<json> results(points.size());
  ParallelFor(static_cast<int>(points.size()), cfg.jobs, [&](int i) {
    const SweepPoint& pt = points[static_cast<std::size_t>(i)];
    json params = BaseParams(cfg, "analyze");
    params["d"] = pt.d;
    params["radius"] = pt.radius;
    params["domain"] = DomainText(cfg.DomainFor(pt.radius));
    params["minimize_gain"] = cfg.minimize_gain;
    params["soundness_samples"] = cfg.soundness_samples;
    params["index"] = i;
    const fs::path file = out / "points" / fmt::format("analyze_{}.json", pt.slug);
    if (auto stored = LoadPoint(file, params)) {
      log << fmt::format("analyze {}: reused {}\n", pt.key, file.string());
      results[static_cast<std::size_t>(i)] = *stored;
      return;
    }
    results[static_cast<std::size_t>(i)] = AnalyzePoint(cfg, pt, i, log);
    StorePoint(file, params, results[static_cast<std::size_t>(i)]);
  });
  std::string csv = "sweepKey,kStar,M,solveStatus,residuals,wallTime,soundness\n";
  int code = kExitOk;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const json& r = results[i];
    const auto sound = r.find("soundness");
    csv += fmt::format("{},{},{},{},{},{},{}\n", points[i].key, Num(NumberOr(r, "k_star", kNaN)),
                       Num(NumberOr(r, "gain", kNaN)), r.at("status").get<std::string>(),
                       Num(NumberOr(r, "residual", kNaN)), Num(NumberOr(r, "wall_time", 0.0)),
                       sound == r.end() ? "" : (sound->get<bool>() ? "pass" : "fail"));
    code = Worse(code, CodeOf(r));
  }
  WriteFileAtomic(out / "summary.csv", csv);
  return code;
}

int RunSimulate(const RunConfig& cfg, std::ostream& log) {
  const SimulationSummary s = Simulate(cfg, cfg.simulate.radius, cfg.simulate.gain, cfg.jobs);
  const fs::path out(cfg.out_dir);
  const BetaFamily fam = cfg.SimulationFamily();
  const AlphaMeasure alpha = cfg.SimulationAlpha();
  const bool settling = cfg.UsesSettlingEstimator();
  std::string csv =
      "kSim,M,family,alpha,estimator,horizon,numIcs,icRule,seed,worstIc,worstTime,gainViolated,escapedIcs,failedIcs\n";
  csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", Num(s.k_sim), Num(cfg.simulate.gain),
                     FamilyName(fam), AlphaName(alpha), settling ? "settling" : "pointwise",
                     Num(cfg.simulate.horizon), s.ics.size(), s.ic_rule, cfg.seed, s.worst_ic, Num(s.worst_time),
                     s.gain_violated ? "true" : "false", s.escaped, s.failed);
  WriteFileAtomic(out / "simulate.csv", csv);

  const int n = cfg.system.nvars;
  std::string ics = "ic";
  for (int j = 0; j < n; ++j) ics += fmt::format(",x{}", j + 1);
  ics += ",k,time,status\n";
  for (std::size_t i = 0; i < s.ics.size(); ++i) {
    ics += fmt::format("{}", i);
    for (int j = 0; j < n; ++j) ics += "," + Num(s.ics[i][j]);
    const IcOutcome& o = s.outcomes[i];
    ics += fmt::format(",{},{},{}\n", Num(o.k), Num(o.time), o.status);
  }
  WriteFileAtomic(out / "ic_results.csv", ics);

  if (cfg.simulate.dump_worst && s.worst_ic >= 0) {
    IntegrationOptions io = Integration(cfg);
    const VectorXd& x0 = s.ics[static_cast<std::size_t>(s.worst_ic)];
    const double threshold = 1e-9 * alpha(x0);
    if (settling) {
      io.abs_tol = 1e-300;
      io.observer = [&](double, const VectorXd& x) { return alpha(x) > threshold; };
    }
    const Trajectory traj = Integrate(MakeVectorField(cfg.system.field), x0, cfg.simulate.horizon, io);
    std::ostringstream dump;
    WriteTrajectoryCsv(traj, alpha, dump);
    WriteFileAtomic(out / "worst_trajectory.csv", dump.str());
  }
  log << fmt::format("simulate: k_sim = {} over {} initial conditions{}\n", Num(s.k_sim), s.ics.size(),
                     s.gain_violated ? " (gain violated)" : "");
  for (std::size_t i = 0; i < s.outcomes.size(); ++i) {
    if (s.outcomes[i].status != "ok") {
      log << fmt::format("  ic {}: {} {}\n", i, s.outcomes[i].status, s.outcomes[i].message);
    }
  }
  return s.failed > 0 ? kExitNumericalTrouble : kExitOk;
}

int RunRegion(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.condition) throw ConfigError("region needs analysis.condition");
  if (*cfg.condition == Condition::kFiniteTime) throw ConfigError("region needs an exponential or rational condition");
  if (cfg.system.nvars != 2) throw ConfigError("region needs a planar system");
  if (cfg.region.k.empty()) throw ConfigError("region needs region.k");
  const fs::path out(cfg.out_dir);
  const std::vector<double>& ks = cfg.region.k;
  const AnalysisSpec spec = cfg.SpecFor(cfg.d, cfg.region.radius_lo);
  const VectorField field = MakeVectorField(cfg.system.field);
  RadiusSearchOptions search;
  search.r_lo = cfg.region.radius_lo;
  search.r_hi = cfg.region.radius_hi;
  search.rel_tol = cfg.region.radius_rel_tol;

  struct Entry {
    json stored;
    std::optional<RegionResult> region;
    ContainmentReport soundness;
    double wall_time = 0.0;
  };
  std::vector<Entry> entries(ks.size());
  const std::vector<std::string> names = DefaultVariableNames(2);
  ParallelFor(static_cast<int>(ks.size()), cfg.jobs, [&](int i) {
    const double k = ks[static_cast<std::size_t>(i)];
    const auto start = std::chrono::steady_clock::now();
    Entry& e = entries[static_cast<std::size_t>(i)];
    json params = BaseParams(cfg, "region");
    params["d"] = cfg.d;
    params["k"] = k;
    params["radius_lo"] = search.r_lo;
    params["radius_hi"] = search.r_hi;
    params["radius_rel_tol"] = search.rel_tol;
    const fs::path file = out / "points" / fmt::format("region_k{}.json", KSlug(k));
    const RegionOptions options = RegionOpts(cfg, i);
    if (auto stored = LoadPoint(file, params)) {
      e.stored = *stored;
      log << fmt::format("region k = {}: reused {}\n", k, file.string());
    } else {
      try {
        const RateRegion rr = RegionForRate(spec, k, RegionDomains(cfg), search, options);
        e.stored["status"] = "ok";
        e.stored["radius"] = rr.radius;
        e.stored["V"] = rr.certificate.V.ToString(names);
        e.stored["certified_k"] = rr.certificate.k;
      } catch (const InfeasibleAtKLo& ex) {
        e.stored["status"] = "infeasible_at_radius_lo";
        e.stored["message"] = ex.what();
      } catch (const NumericalTroubleError& ex) {
        e.stored["status"] = "numerical_trouble";
        e.stored["message"] = ex.what();
      }
      StorePoint(file, params, e.stored);
    }
    if (e.stored["status"] == "ok") {
      const Polynomial V = ParsePolynomial(e.stored["V"].get<std::string>(), names);
      const double radius = e.stored["radius"].get<double>();
      e.region = AnalyzeRegion(V, cfg.DomainFor(radius), field, options);
      e.soundness = CheckSublevelInside(V, e.region->c_star, e.region->domain, cfg.region.soundness_samples,
                                        DeriveSeed(cfg.seed, kStreamSoundness + i));
      std::ostringstream poly;
      WritePolylineCsv(e.region->boundary, poly);
      WriteFileAtomic(out / fmt::format("region_k{}.csv", KSlug(k)), poly.str());
    }
    e.wall_time = cfg.wall_time ? Seconds(start) : 0.0;
    log << fmt::format("region k = {}: {}\n", k, e.stored["status"].get<std::string>());
  });

  int code = kExitOk;
  std::string csv = "k,radius,cStar,invariant,invarianceWorst,sound,boundaryPoints,boundaryMethod,status,wallTime\n";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const Entry& e = entries[i];
    code = Worse(code, CodeOf(e.stored));
    if (!e.region) {
      csv += fmt::format("{},,,,,,,,{},{}\n", Num(ks[i]), e.stored["status"].get<std::string>(), Num(e.wall_time));
      continue;
    }
    const RegionResult& r = *e.region;
    csv += fmt::format("{},{},{},{},{},{},{},{},ok,{}\n", Num(ks[i]), Num(e.stored["radius"].get<double>()),
                       Num(r.c_star), r.invariance.passed ? "pass" : "fail", Num(r.invariance.worst_ratio),
                       e.soundness.holds ? "pass" : "fail", r.boundary.points.size(),
                       r.boundary.from_marching_squares ? "marching_squares" : "polar", Num(e.wall_time));
  }
  WriteFileAtomic(out / "regions.csv", csv);

  // Consecutive regions in increasing k: region(k_next) inside region(k).
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (entries[i].region) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ks[a] < ks[b]; });
  std::string nest = "kInner,kOuter,holds,worst\n";
  for (std::size_t j = 0; j + 1 < order.size(); ++j) {
    const std::size_t outer = order[j], inner = order[j + 1];
    const ContainmentReport rep = CheckNesting(*entries[inner].region, *entries[outer].region,
                                               cfg.region.nesting_samples, DeriveSeed(cfg.seed, kStreamNesting + j));
    nest += fmt::format("{},{},{},{}\n", Num(ks[inner]), Num(ks[outer]), rep.holds ? "true" : "false", Num(rep.worst));
    log << fmt::format("nesting k = {} in k = {}: {}\n", ks[inner], ks[outer], rep.holds ? "holds" : "fails");
  }
  WriteFileAtomic(out / "nesting.csv", nest);
  return code;
}

int RunCompare(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.condition || (*cfg.condition != Condition::kRationalI && *cfg.condition != Condition::kRationalII)) {
    throw ConfigError("compare needs a rational analysis.condition");
  }
  if (!(cfg.fixed_gain >= 1.0)) throw ConfigError("compare needs analysis.gain (the fixed gain M)");
  const std::vector<SweepPoint> points = SweepPoints(cfg);
  const fs::path out(cfg.out_dir);
  std::vector<json> results(points.size());
  ParallelFor(static_cast<int>(points.size()), cfg.jobs, [&](int i) {
    const SweepPoint& pt = points[static_cast<std::size_t>(i)];
    json params = BaseParams(cfg, "compare");
    params["d"] = pt.d;
    params["radius"] = pt.radius;
    const fs::path file = out / "points" / fmt::format("compare_{}.json", pt.slug);
    if (auto stored = LoadPoint(file, params)) {
      results[static_cast<std::size_t>(i)] = *stored;
      return;
    }
    json res;
    res["status"] = "ok";
    for (const auto& [name, cond] : {std::pair{"k_i", Condition::kRationalI}, std::pair{"k_ii", Condition::kRationalII}}) {
      AnalysisSpec spec = cfg.SpecFor(pt.d, pt.radius);
      spec.condition = cond;
      spec.fixed_gain = cond == Condition::kRationalI ? cfg.fixed_gain : 0.0;
      try {
        res[name] = BisectRate(spec).k_star;
      } catch (const InfeasibleAtKLo& e) {
        res[name] = nullptr;
        if (res["status"] == "ok") res["status"] = "infeasible_at_k_lo";
        res["message"] = e.what();
      } catch (const NumericalTroubleError& e) {
        res[name] = nullptr;
        res["status"] = "numerical_trouble";
        res["message"] = e.what();
      }
    }
    log << fmt::format("compare {}: {}\n", pt.key, res["status"].get<std::string>());
    results[static_cast<std::size_t>(i)] = res;
    StorePoint(file, params, res);
  });

  // One simulation per distinct domain radius, at the fixed gain.
  std::map<double, double> k_sim;
  for (const SweepPoint& pt : points) {
    if (k_sim.contains(pt.radius)) continue;
    const double radius = pt.radius > 0.0 ? pt.radius : cfg.simulate.radius;
    k_sim[pt.radius] = Simulate(cfg, radius, cfg.fixed_gain, cfg.jobs).k_sim;
    log << fmt::format("compare: k_sim = {} for initial radius {}\n", Num(k_sim[pt.radius]), radius);
  }
  std::string csv = "d,R,k_i,k_ii,k_sim,ratio_i_over_ii,ratio_ii_over_sim,status\n";
  int code = kExitOk;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const json& r = results[i];
    const double ki = NumberOr(r, "k_i", kNaN), kii = NumberOr(r, "k_ii", kNaN), ks = k_sim[points[i].radius];
    csv += fmt::format("{},{},{},{},{},{},{},{}\n", points[i].d, points[i].radius > 0.0 ? Num(points[i].radius) : "",
                       Num(ki), Num(kii), Num(ks), Num(ki / kii), Num(kii / ks), r["status"].get<std::string>());
    code = Worse(code, CodeOf(r));
  }
  WriteFileAtomic(out / "compare.csv", csv);
  return code;
}

int Main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Certified rate and gain performance of polynomial vector fields"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 0;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"analyze", "bisect the certified rate and minimize the gain over the sweep"},
      {"simulate", "estimate the rate from simulated trajectories"},
      {"region", "compute certified regions of performance for a list of rates"},
      {"compare", "compare rational conditions (i), (ii) and simulation"},
  };
  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "64-bit seed for all sampling");
    sub->add_option("--jobs", jobs, "worker threads");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  const CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--out") > 0) overrides.out_dir = out_dir;
  if (chosen->count("--seed") > 0) overrides.seed = seed;
  if (chosen->count("--jobs") > 0) overrides.jobs = jobs;
  try {
    const RunConfig cfg = Resolve(LoadConfig(config_path), overrides);
    const std::string& name = chosen->get_name();
    if (name == "analyze") return RunAnalyze(cfg, err);
    if (name == "simulate") return RunSimulate(cfg, err);
    if (name == "region") return RunRegion(cfg, err);
    return RunCompare(cfg, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const InfeasibleAtKLo& e) {
    err << e.what() << "\n";
    return kExitInfeasibleAtKLo;
  } catch (const std::exception& e) {
    err << "numerical trouble: " << e.what() << "\n";
    return kExitNumericalTrouble;
  }
}

}  // namespace ratecert::app
