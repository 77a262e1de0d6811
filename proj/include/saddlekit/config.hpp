#pragma once

// JSON experiment configs: descriptor and problem (de)serialization, ExperimentSpec.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "saddlekit/error.hpp"
#include "saddlekit/functions.hpp"
#include "saddlekit/linalg.hpp"
#include "saddlekit/problems.hpp"
#include "saddlekit/solvers.hpp"

namespace saddlekit {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  std::vector<std::string> unknown;
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string msg = where + ": unknown key(s):";
    for (const auto& k : unknown) msg += " \"" + k + "\"";
    throw ConfigError(msg);
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(where + ": missing \"" + key + "\"");
  return *it;
}

inline double to_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline std::size_t to_count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline Vector to_vector(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = to_number(v[i], where + "[" + std::to_string(i) + "]");
  return out;
}

inline Matrix to_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vector r = to_vector(v[i], where + "[" + std::to_string(i) + "]");
    if (!rows.empty() && r.size() != rows.front().size()) throw ConfigError(where + ": ragged rows");
    rows.emplace_back(r.begin(), r.end());
  }
  if (rows.front().empty()) throw ConfigError(where + ": rows must be non-empty");
  return Matrix::from_rows(rows);
}

inline json from_vector(const Vector& v) { return json(std::vector<double>(v.begin(), v.end())); }
inline json from_matrix(const Matrix& m) { return json(m.to_rows()); }

}  // namespace detail

inline FunctionDescriptor descriptor_from_json(const json& j, const std::string& where = "descriptor") {
  using namespace detail;
  if (!j.is_object()) throw ConfigError(where + ": expected an object with a \"kind\"");
  const json& kind_j = require(j, "kind", where);
  if (!kind_j.is_string()) throw ConfigError(where + ".kind: expected a string");
  const std::string kind = kind_j.get<std::string>();
  if (kind == "quadratic") {
    reject_unknown_keys(j, {"kind", "P", "q", "c"}, where);
    const Matrix p = to_matrix(require(j, "P", where), where + ".P");
    const Vector q = j.contains("q") ? to_vector(j["q"], where + ".q") : Vector(p.rows());
    const double c = j.contains("c") ? to_number(j["c"], where + ".c") : 0.0;
    return FunctionDescriptor::quadratic(p, q, c);
  }
  if (kind == "least-squares") {
    reject_unknown_keys(j, {"kind", "A", "b"}, where);
    return FunctionDescriptor::least_squares(to_matrix(require(j, "A", where), where + ".A"),
                                             to_vector(require(j, "b", where), where + ".b"));
  }
  if (kind == "l1") {
    reject_unknown_keys(j, {"kind", "lambda"}, where);
    return FunctionDescriptor::scaled_l1(to_number(require(j, "lambda", where), where + ".lambda"));
  }
  if (kind == "linear") {
    reject_unknown_keys(j, {"kind", "c"}, where);
    return FunctionDescriptor::linear(to_vector(require(j, "c", where), where + ".c"));
  }
  if (kind == "linf-ball") {
    reject_unknown_keys(j, {"kind", "radius"}, where);
    return FunctionDescriptor::linf_ball(to_number(require(j, "radius", where), where + ".radius"));
  }
  if (kind == "affine") {
    reject_unknown_keys(j, {"kind", "A", "b"}, where);
    return FunctionDescriptor::affine(to_matrix(require(j, "A", where), where + ".A"),
                                      to_vector(require(j, "b", where), where + ".b"));
  }
  if (kind == "zero") {
    reject_unknown_keys(j, {"kind", "dim"}, where);
    return FunctionDescriptor::zero(j.contains("dim") ? to_count(j["dim"], where + ".dim") : 0);
  }
  throw ConfigError(where + ": unknown descriptor kind \"" + kind +
                    "\" (expected quadratic, least-squares, l1, linear, linf-ball, affine or zero)");
}

inline json descriptor_to_json(const FunctionDescriptor& d) {
  using detail::from_matrix;
  using detail::from_vector;
  return std::visit(
      [](const auto& k) -> json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Quadratic>) {
          return {{"kind", "quadratic"}, {"P", from_matrix(k.P)}, {"q", from_vector(k.q)}, {"c", k.c}};
        } else if constexpr (std::is_same_v<T, ScaledL1>) {
          return {{"kind", "l1"}, {"lambda", k.lambda}};
        } else if constexpr (std::is_same_v<T, Linear>) {
          return {{"kind", "linear"}, {"c", from_vector(k.c)}};
        } else if constexpr (std::is_same_v<T, IndicatorLinfBall>) {
          return {{"kind", "linf-ball"}, {"radius", k.radius}};
        } else if constexpr (std::is_same_v<T, IndicatorAffine>) {
          return {{"kind", "affine"}, {"A", from_matrix(k.A)}, {"b", from_vector(k.b)}};
        } else {
          return {{"kind", "zero"}, {"dim", k.dim}};
        }
      },
      d.kind());
}

namespace detail {

// F given inline, or "identity" / "difference" sized by d1.
inline Matrix coupling_from_json(const json& j, std::optional<std::size_t> d1, const std::string& where) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (!d1) throw ConfigError(where + ": \"" + name + "\" needs the primal dimension; give F as an array");
    if (name == "identity") return Matrix::identity(*d1);
    if (name == "difference") return difference_matrix(*d1);
    throw ConfigError(where + ": unknown coupling \"" + name + "\" (expected identity, difference or an array)");
  }
  return to_matrix(j, where);
}

}  // namespace detail

// Problem kinds: counterexample, generalized-lasso, random-lasso, basis-pursuit,
// random-quadratic, custom.
inline SaddleProblem problem_from_json(const json& j, std::uint64_t seed = 0) {
  using namespace detail;
  const std::string where = "problem";
  if (!j.is_object()) throw ConfigError("problem: expected an object with a \"kind\"");
  const json& kind_j = require(j, "kind", where);
  if (!kind_j.is_string()) throw ConfigError("problem.kind: expected a string");
  const std::string kind = kind_j.get<std::string>();
  if (kind == "counterexample") {
    reject_unknown_keys(j, {"kind"}, where);
    return make_counterexample();
  }
  if (kind == "generalized-lasso") {
    reject_unknown_keys(j, {"kind", "A", "b", "lambda", "F"}, where);
    const Matrix a = to_matrix(require(j, "A", where), "problem.A");
    const Matrix f = j.contains("F") ? coupling_from_json(j["F"], a.cols(), "problem.F") : Matrix::identity(a.cols());
    return make_generalized_lasso(a, to_vector(require(j, "b", where), "problem.b"),
                                  to_number(require(j, "lambda", where), "problem.lambda"), f);
  }
  if (kind == "random-lasso") {
    reject_unknown_keys(j, {"kind", "rows", "cols", "lambda", "fused", "seed"}, where);
    const bool fused = j.contains("fused") ? j["fused"].get<bool>() : false;
    const std::uint64_t s = j.contains("seed") ? j["seed"].get<std::uint64_t>() : seed;
    return make_random_lasso(to_count(require(j, "rows", where), "problem.rows"),
                             to_count(require(j, "cols", where), "problem.cols"),
                             to_number(require(j, "lambda", where), "problem.lambda"), fused, s);
  }
  if (kind == "basis-pursuit") {
    reject_unknown_keys(j, {"kind", "A", "b"}, where);
    return make_basis_pursuit(to_matrix(require(j, "A", where), "problem.A"),
                              to_vector(require(j, "b", where), "problem.b"));
  }
  if (kind == "random-quadratic") {
    reject_unknown_keys(j, {"kind", "d1", "d2", "seed"}, where);
    const std::uint64_t s = j.contains("seed") ? j["seed"].get<std::uint64_t>() : seed;
    return make_random_quadratic(to_count(require(j, "d1", where), "problem.d1"),
                                 to_count(require(j, "d2", where), "problem.d2"), s);
  }
  if (kind == "custom") {
    reject_unknown_keys(j, {"kind", "name", "f", "g", "gstar", "F"}, where);
    if (j.contains("g") == j.contains("gstar")) throw ConfigError("problem: give exactly one of \"g\" and \"gstar\"");
    const FunctionDescriptor f = descriptor_from_json(require(j, "f", where), "problem.f");
    const FunctionDescriptor gstar = j.contains("gstar") ? descriptor_from_json(j["gstar"], "problem.gstar")
                                                         : conjugate(descriptor_from_json(j["g"], "problem.g"));
    const Matrix coupling = coupling_from_json(require(j, "F", where), f.dimension(), "problem.F");
    const std::string name = j.contains("name") ? j["name"].get<std::string>() : "custom";
    return SaddleProblem::make(name, f, gstar, coupling);
  }
  throw ConfigError("problem: unknown kind \"" + kind +
                    "\" (expected counterexample, generalized-lasso, random-lasso, basis-pursuit, "
                    "random-quadratic or custom)");
}

struct PlotSpec {
  enum class Kind { kTrajectory2d, kSeriesLoglog, kSeriesLinear };
  Kind kind = Kind::kTrajectory2d;
  std::vector<std::string> columns;
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  friend bool operator==(const PlotSpec&, const PlotSpec&) = default;
};

inline std::string to_string(PlotSpec::Kind k) {
  switch (k) {
    case PlotSpec::Kind::kTrajectory2d: return "trajectory-2d";
    case PlotSpec::Kind::kSeriesLoglog: return "series-loglog";
    case PlotSpec::Kind::kSeriesLinear: return "series-linear";
  }
  return "?";
}

inline PlotSpec::Kind parse_plot_kind(const std::string& s) {
  if (s == "trajectory-2d") return PlotSpec::Kind::kTrajectory2d;
  if (s == "series-loglog") return PlotSpec::Kind::kSeriesLoglog;
  if (s == "series-linear") return PlotSpec::Kind::kSeriesLinear;
  throw ConfigError("plot.kind: unknown \"" + s + "\" (expected trajectory-2d, series-loglog or series-linear)");
}

struct OutputPaths {
  std::string csv = "trace.csv";
  std::string json = "report.json";
  std::optional<std::string> svg;
  friend bool operator==(const OutputPaths&, const OutputPaths&) = default;
};

// Optional RK4 integration of the continuous system alongside the discrete run.
struct OdeSpec {
  std::string system = "high-res";  // low-res | high-res | general-high-res
  double dt = 1e-3;
  std::size_t steps = 1000;
  std::string csv = "trajectory.csv";
  std::optional<std::string> svg;
  friend bool operator==(const OdeSpec&, const OdeSpec&) = default;
};

inline const std::vector<std::string>& all_diagnostics() {
  static const std::vector<std::string> flags{"lyapunov", "ne", "gap", "bounds"};
  return flags;
}

struct ExperimentSpec {
  json problem;
  Algorithm algorithm = Algorithm::kPdhg;
  StepSchedule schedule = StepSchedule::single(1.0);
  std::optional<Vector> x0;
  std::optional<Vector> y0;
  std::size_t iterations = 0;
  std::set<std::string> diagnostics{all_diagnostics().begin(), all_diagnostics().end()};
  OutputPaths outputs;
  std::uint64_t seed = 0;
  bool demonstration = false;
  std::optional<std::pair<Vector, Vector>> anchor;
  std::optional<PlotSpec> plot;
  std::optional<double> early_stop;
  std::optional<OdeSpec> ode;

  bool has(const std::string& flag) const { return diagnostics.count(flag) > 0; }
  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

inline PlotSpec plot_from_json(const json& j) {
  using namespace detail;
  reject_unknown_keys(j, {"kind", "columns", "title", "x_label", "y_label", "log_x", "log_y"}, "plot");
  PlotSpec ps;
  ps.kind = parse_plot_kind(require(j, "kind", "plot").get<std::string>());
  if (j.contains("columns")) ps.columns = j["columns"].get<std::vector<std::string>>();
  if (j.contains("title")) ps.title = j["title"].get<std::string>();
  if (j.contains("x_label")) ps.x_label = j["x_label"].get<std::string>();
  if (j.contains("y_label")) ps.y_label = j["y_label"].get<std::string>();
  const bool loglog = ps.kind == PlotSpec::Kind::kSeriesLoglog;
  ps.log_x = j.contains("log_x") ? j["log_x"].get<bool>() : loglog;
  ps.log_y = j.contains("log_y") ? j["log_y"].get<bool>() : loglog;
  if (ps.columns.empty()) {
    if (ps.kind == PlotSpec::Kind::kTrajectory2d) ps.columns = {"x_0", "y_0"};
    else ps.columns = {"ne"};
  }
  if (ps.kind == PlotSpec::Kind::kTrajectory2d && ps.columns.size() != 2)
    throw ConfigError("plot: trajectory-2d needs exactly two columns");
  return ps;
}

inline json plot_to_json(const PlotSpec& ps) {
  return {{"kind", to_string(ps.kind)}, {"columns", ps.columns}, {"title", ps.title},   {"x_label", ps.x_label},
          {"y_label", ps.y_label},      {"log_x", ps.log_x},       {"log_y", ps.log_y}};
}

inline ExperimentSpec spec_from_json(const json& j) {
  using namespace detail;
  reject_unknown_keys(j,
                      {"problem", "algorithm", "schedule", "x0", "y0", "iterations", "diagnostics", "outputs", "seed",
                       "demonstration", "anchor", "plot", "early_stop", "ode"},
                      "config");
  ExperimentSpec spec;
  spec.problem = require(j, "problem", "config");
  if (!spec.problem.is_object()) throw ConfigError("config.problem: expected an object");

  if (j.contains("algorithm")) {
    if (!j["algorithm"].is_string()) throw ConfigError("config.algorithm: expected a string");
    spec.algorithm = parse_algorithm(j["algorithm"].get<std::string>());
  }

  const json& sched = require(j, "schedule", "config");
  reject_unknown_keys(sched, {"s", "tau", "sigma"}, "schedule");
  const bool has_s = sched.contains("s");
  const bool has_pair = sched.contains("tau") || sched.contains("sigma");
  if (has_s == has_pair) throw ConfigError("schedule: give either {\"s\"} or {\"tau\", \"sigma\"}, not both or neither");
  if (has_s) {
    spec.schedule = StepSchedule::single(to_number(sched["s"], "schedule.s"));
  } else {
    spec.schedule = StepSchedule::pair(to_number(require(sched, "tau", "schedule"), "schedule.tau"),
                                       to_number(require(sched, "sigma", "schedule"), "schedule.sigma"));
  }

  if (j.contains("x0")) spec.x0 = to_vector(j["x0"], "config.x0");
  if (j.contains("y0")) spec.y0 = to_vector(j["y0"], "config.y0");
  spec.iterations = to_count(require(j, "iterations", "config"), "config.iterations");

  if (j.contains("diagnostics")) {
    spec.diagnostics.clear();
    const json& d = j["diagnostics"];
    if (!d.is_array()) throw ConfigError("config.diagnostics: expected an array of flags");
    for (const auto& flag : d) {
      const std::string f = flag.get<std::string>();
      const auto& all = all_diagnostics();
      if (std::find(all.begin(), all.end(), f) == all.end())
        throw ConfigError("config.diagnostics: unknown flag \"" + f + "\" (expected lyapunov, ne, gap, bounds)");
      spec.diagnostics.insert(f);
    }
  }

  if (j.contains("outputs")) {
    const json& o = j["outputs"];
    reject_unknown_keys(o, {"csv", "json", "svg"}, "outputs");
    if (o.contains("csv")) spec.outputs.csv = o["csv"].get<std::string>();
    if (o.contains("json")) spec.outputs.json = o["json"].get<std::string>();
    if (o.contains("svg")) spec.outputs.svg = o["svg"].get<std::string>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
    spec.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("demonstration")) spec.demonstration = j["demonstration"].get<bool>();
  if (j.contains("anchor")) {
    const json& a = j["anchor"];
    reject_unknown_keys(a, {"x", "y"}, "anchor");
    spec.anchor = std::make_pair(to_vector(require(a, "x", "anchor"), "anchor.x"),
                                 to_vector(require(a, "y", "anchor"), "anchor.y"));
  }
  if (j.contains("plot")) spec.plot = plot_from_json(j["plot"]);
  if (j.contains("early_stop")) spec.early_stop = to_number(j["early_stop"], "config.early_stop");
  if (j.contains("ode")) {
    const json& o = j["ode"];
    reject_unknown_keys(o, {"system", "dt", "steps", "csv", "svg"}, "ode");
    OdeSpec os;
    if (o.contains("system")) os.system = o["system"].get<std::string>();
    if (os.system != "low-res" && os.system != "high-res" && os.system != "general-high-res")
      throw ConfigError("ode.system: unknown \"" + os.system + "\" (expected low-res, high-res or general-high-res)");
    if (o.contains("dt")) os.dt = to_number(o["dt"], "ode.dt");
    if (!(os.dt > 0.0)) throw ConfigError("ode.dt must be > 0");
    if (o.contains("steps")) os.steps = to_count(o["steps"], "ode.steps");
    if (o.contains("csv")) os.csv = o["csv"].get<std::string>();
    if (o.contains("svg")) os.svg = o["svg"].get<std::string>();
    spec.ode = os;
  }
  return spec;
}

inline ExperimentSpec parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return spec_from_json(j);
  } catch (const json::type_error& e) {
    throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
  }
}

inline json spec_to_json(const ExperimentSpec& spec) {
  using detail::from_vector;
  json j;
  j["problem"] = spec.problem;
  j["algorithm"] = std::string(to_string(spec.algorithm));
  if (spec.schedule.is_single()) j["schedule"] = {{"s", spec.schedule.tau()}};
  else j["schedule"] = {{"tau", spec.schedule.tau()}, {"sigma", spec.schedule.sigma()}};
  if (spec.x0) j["x0"] = from_vector(*spec.x0);
  if (spec.y0) j["y0"] = from_vector(*spec.y0);
  j["iterations"] = spec.iterations;
  j["diagnostics"] = std::vector<std::string>(spec.diagnostics.begin(), spec.diagnostics.end());
  j["outputs"] = {{"csv", spec.outputs.csv}, {"json", spec.outputs.json}};
  if (spec.outputs.svg) j["outputs"]["svg"] = *spec.outputs.svg;
  j["seed"] = spec.seed;
  j["demonstration"] = spec.demonstration;
  if (spec.anchor) j["anchor"] = {{"x", from_vector(spec.anchor->first)}, {"y", from_vector(spec.anchor->second)}};
  if (spec.plot) j["plot"] = plot_to_json(*spec.plot);
  if (spec.early_stop) j["early_stop"] = *spec.early_stop;
  if (spec.ode) {
    j["ode"] = {{"system", spec.ode->system}, {"dt", spec.ode->dt}, {"steps", spec.ode->steps}, {"csv", spec.ode->csv}};
    if (spec.ode->svg) j["ode"]["svg"] = *spec.ode->svg;
  }
  return j;
}

inline std::string serialize(const ExperimentSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

// SADDLEKIT_SEED, when set to an unsigned integer, replaces the spec seed.
inline void apply_env_overrides(ExperimentSpec& spec) {
  const char* env = std::getenv("SADDLEKIT_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-') throw ConfigError(std::string("SADDLEKIT_SEED is not an unsigned integer: ") + env);
  spec.seed = v;
}

}  // namespace saddlekit
