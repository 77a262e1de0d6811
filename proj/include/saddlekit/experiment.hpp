#pragma once

// End-to-end experiment execution behind the CLI: build the problem, run the
// solver, attach diagnostics, optionally integrate the ODE, write artifacts.

#include <algorithm>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "saddlekit/config.hpp"
#include "saddlekit/diagnostics.hpp"
#include "saddlekit/error.hpp"
#include "saddlekit/io.hpp"
#include "saddlekit/linalg.hpp"
#include "saddlekit/ode.hpp"
#include "saddlekit/problems.hpp"
#include "saddlekit/solvers.hpp"

namespace saddlekit {

struct ExperimentResult {
  SaddleProblem problem;
  Trace trace;
  std::optional<SaddleCertificate> certificate;
  std::string certificate_note;
  std::optional<DiagnosticsReport> report;
  std::vector<ContinuousState> trajectory;
  std::vector<BoundCheck> continuous_checks;
  std::vector<std::filesystem::path> written;
};

namespace detail {

inline json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json series_json(const std::vector<double>& s) {
  json out = json::array();
  for (double v : s) out.push_back(nullable(v));
  return out;
}

inline json checks_json(const std::vector<BoundCheck>& checks) {
  json out = json::array();
  for (const auto& b : checks) {
    json e{{"theorem", b.tag}, {"lhs", nullable(b.lhs)}, {"rhs", nullable(b.rhs)}, {"pass", b.pass}, {"n", b.n}};
    if (!b.note.empty()) e["note"] = b.note;
    out.push_back(std::move(e));
  }
  return out;
}

inline std::optional<double> state_coordinate(const std::string& column, const SaddleCertificate& c) {
  if (column.size() < 3 || column[1] != '_') return std::nullopt;
  const Vector* v = column[0] == 'x' ? &c.x_star : column[0] == 'y' ? &c.y_star : nullptr;
  if (!v) return std::nullopt;
  try {
    const std::size_t i = std::stoul(column.substr(2));
    if (i < v->size()) return (*v)[i];
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

inline std::optional<std::pair<double, double>> saddle_marker(const PlotSpec& ps,
                                                              const std::optional<SaddleCertificate>& cert) {
  if (!cert || ps.kind != PlotSpec::Kind::kTrajectory2d) return std::nullopt;
  const auto a = state_coordinate(ps.columns[0], *cert);
  const auto b = state_coordinate(ps.columns[1], *cert);
  if (!a || !b) return std::nullopt;
  return std::make_pair(*a, *b);
}

inline std::filesystem::path resolve(const std::filesystem::path& out_dir, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : out_dir / path;
}

}  // namespace detail

inline json report_to_json(const ExperimentSpec& spec, const ExperimentResult& r) {
  using detail::from_vector;
  json j;
  j["problem"] = r.problem.name;
  j["problem_hash"] = r.trace.meta.problem_hash;
  j["algorithm"] = std::string(to_string(spec.algorithm));
  j["schedule"] = spec.schedule.describe();
  j["step_product"] = spec.schedule.product_bound(r.problem.norm_F);
  j["norm_F"] = r.problem.norm_F;
  j["mu"] = r.problem.mu;
  j["seed"] = spec.seed;
  j["iterations"] = r.trace.size() - 1;
  j["final"] = {{"x", from_vector(r.trace.back().x)}, {"y", from_vector(r.trace.back().y)}};
  if (r.certificate) {
    j["certificate"] = {{"x_star", from_vector(r.certificate->x_star)},
                        {"y_star", from_vector(r.certificate->y_star)},
                        {"residual", r.certificate->residual}};
  } else {
    j["certificate"] = nullptr;
    j["certificate_note"] = r.certificate_note;
  }
  json checks = json::array();
  if (r.report) {
    const auto& rep = *r.report;
    checks = detail::checks_json(rep.bound_checks);
    j["verdicts"] = {{"lyapunov_monotone", rep.monotone_lyapunov.pass}, {"ne_monotone", rep.monotone_ne.pass}};
    if (rep.monotone_lyapunov.first_violation)
      j["verdicts"]["lyapunov_first_violation"] = *rep.monotone_lyapunov.first_violation;
    if (rep.monotone_ne.first_violation) j["verdicts"]["ne_first_violation"] = *rep.monotone_ne.first_violation;
    j["rate_slope_ne"] = rep.rate_slope_ne ? json(*rep.rate_slope_ne) : json(nullptr);
  }
  const json continuous = detail::checks_json(r.continuous_checks);
  for (const auto& c : continuous) checks.push_back(c);
  j["checks"] = std::move(checks);

  const Table t = trace_table(r.trace);
  json series;
  for (const auto& name : diagnostic_columns()) series[name] = detail::series_json(t.column(name));
  j["series"] = std::move(series);
  return j;
}

// Runs one experiment and writes its artifacts below out_dir. Errors propagate.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir = ".") {
  ExperimentResult r{problem_from_json(spec.problem, spec.seed), {}, {}, {}, {}, {}, {}, {}};
  const SaddleProblem& p = r.problem;
  const Vector x0 = spec.x0.value_or(Vector(p.d1()));
  const Vector y0 = spec.y0.value_or(Vector(p.d2()));
  if (x0.size() != p.d1() || y0.size() != p.d2()) {
    throw DimensionError("x0/y0 have dimensions (" + std::to_string(x0.size()) + ", " + std::to_string(y0.size()) +
                         ") but the problem needs (" + std::to_string(p.d1()) + ", " + std::to_string(p.d2()) + ")");
  }
  try {
    r.certificate = saddle_oracle(p);
  } catch (const Error& e) {
    r.certificate_note = e.what();
  }

  RunOptions ro;
  ro.demonstration = spec.demonstration;
  ro.early_stop_ne = spec.early_stop;
  ro.seed = spec.seed;
  r.trace = run(p, spec.algorithm, spec.schedule, x0, y0, spec.iterations, ro);

  const Anchor anchor = spec.anchor ? Anchor::arbitrary(spec.anchor->first, spec.anchor->second)
                                    : Anchor::arbitrary(Vector(p.d1()), Vector(p.d2()));
  if (anchor.x.size() != p.d1() || anchor.y.size() != p.d2()) throw DimensionError("anchor dimensions do not match");
  const SaddleCertificate* cert = r.certificate ? &*r.certificate : nullptr;
  if (!spec.diagnostics.empty()) {
    AnalyzeOptions ao;
    ao.bounds.seed = spec.seed;
    r.report = analyze(r.trace, p, spec.schedule, cert, anchor, ao);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (auto& rec : r.trace.records) {
      if (!spec.has("lyapunov")) rec.diag.lyapunov_saddle = rec.diag.lyapunov_anchor = nan;
      if (!spec.has("ne")) rec.diag.ne = nan;
      if (!spec.has("gap")) rec.diag.vi_gap_saddle = rec.diag.dist_sq_avg_x = nan;
    }
    if (!spec.has("bounds")) r.report->bound_checks.clear();
  }

  std::optional<Table> traj_table;
  if (spec.ode) {
    const OdeSpec& os = *spec.ode;
    const OdeSystem sys = os.system == "low-res"    ? OdeSystem::low_res(p)
                          : os.system == "high-res" ? OdeSystem::high_res(p, spec.schedule.effective_step())
                                                    : OdeSystem::general_high_res(p, spec.schedule.tau(),
                                                                                  spec.schedule.sigma());
    r.trajectory = rk4_trajectory(sys, ContinuousState{0.0, x0, y0}, os.dt, os.steps);
    if (cert && sys.kind() != OdeSystem::Kind::kLowRes && spec.has("bounds"))
      r.continuous_checks = continuous_bound_checks(sys, r.trajectory, *cert);
    traj_table = trajectory_table(r.trajectory, p, spec.schedule, cert, anchor);
  }

  const auto csv_path = detail::resolve(out_dir, spec.outputs.csv);
  write_atomic(csv_path, to_csv(trace_table(r.trace)));
  r.written.push_back(csv_path);
  const auto json_path = detail::resolve(out_dir, spec.outputs.json);
  write_atomic(json_path, report_to_json(spec, r).dump(2) + "\n");
  r.written.push_back(json_path);
  if (spec.outputs.svg) {
    const PlotSpec ps = spec.plot.value_or(
        PlotSpec{PlotSpec::Kind::kTrajectory2d, {"x_0", "y_0"}, r.problem.name, "", "", false, false});
    const auto svg_path = detail::resolve(out_dir, *spec.outputs.svg);
    emit_svg(r.trace, ps, svg_path, detail::saddle_marker(ps, r.certificate));
    r.written.push_back(svg_path);
  }
  if (traj_table) {
    const auto path = detail::resolve(out_dir, spec.ode->csv);
    write_atomic(path, to_csv(*traj_table));
    r.written.push_back(path);
    if (spec.ode->svg) {
      PlotSpec ps;
      ps.columns = {"x_0", "y_0"};
      ps.title = r.problem.name + " (" + spec.ode->system + ")";
      const auto svg_path = detail::resolve(out_dir, *spec.ode->svg);
      emit_svg(*traj_table, ps, svg_path, detail::saddle_marker(ps, r.certificate));
      r.written.push_back(svg_path);
    }
  }
  return r;
}

struct OdeComparison {
  double max_deviation = 0.0;
  std::size_t steps = 0;
  std::size_t worst_step = 0;
};

// PDHG (or general PDHG) against implicit Euler on the matching high-resolution
// system with h = s, step by step from the same start.
inline OdeComparison ode_compare(const ExperimentSpec& spec) {
  if (spec.algorithm == Algorithm::kArrowHurwicz)
    throw ConfigError("ode-compare needs algorithm pdhg or general-pdhg");
  const SaddleProblem p = problem_from_json(spec.problem, spec.seed);
  const StepSchedule& sched = spec.schedule;
  const OdeSystem sys = sched.is_single() ? OdeSystem::high_res(p, sched.tau())
                                          : OdeSystem::general_high_res(p, sched.tau(), sched.sigma());
  const double h = sched.effective_step();
  SolverState st = SolverState::initial(spec.x0.value_or(Vector(p.d1())), spec.y0.value_or(Vector(p.d2())));
  detail::check_state(p, st);
  ContinuousState cs{0.0, st.x, st.y};
  OdeComparison out;
  out.steps = spec.iterations;
  for (std::size_t k = 0; k < spec.iterations; ++k) {
    st = step(p, spec.algorithm, sched, st);
    cs = implicit_euler_step(sys, cs, h);
    const double dev = std::max(norm_inf(st.x - cs.X), norm_inf(st.y - cs.Y));
    if (!(dev <= out.max_deviation)) {
      out.max_deviation = dev;
      out.worst_step = k + 1;
    }
  }
  return out;
}

}  // namespace saddlekit
