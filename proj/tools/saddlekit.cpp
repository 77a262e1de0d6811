// saddlekit command-line front end.
//
//   saddlekit run <config> [--out-dir DIR]
//   saddlekit sweep <config> --param s --values a,b,c [--out-dir DIR] [--jobs N]
//   saddlekit counterexample --algorithm X --s V --steps N [--csv PATH] [--svg PATH]
//   saddlekit ode-compare <config> [--tol T]
//
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "saddlekit/config.hpp"
#include "saddlekit/diagnostics.hpp"
#include "saddlekit/error.hpp"
#include "saddlekit/experiment.hpp"
#include "saddlekit/io.hpp"
#include "saddlekit/problems.hpp"
#include "saddlekit/solvers.hpp"

namespace sk = saddlekit;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int exit_code(const sk::Error& e) {
  return e.category() == sk::Error::Category::kConfig ? kExitConfig : kExitNumerical;
}

sk::ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sk::ConfigError("cannot read config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  sk::ExperimentSpec spec = sk::parse_config(buf.str());
  sk::apply_env_overrides(spec);
  return spec;
}

void print_summary(std::ostream& os, const sk::ExperimentResult& r) {
  const auto& last = r.trace.back();
  os << r.problem.name << ": " << r.trace.size() - 1 << " iterations, final x = [";
  for (std::size_t i = 0; i < last.x.size(); ++i) os << (i ? ", " : "") << sk::format_number(last.x[i]);
  os << "]\n";
  if (r.report) {
    for (const auto& b : r.report->bound_checks)
      os << "  " << (b.pass ? "pass" : "FAIL") << "  " << b.tag << (b.note.empty() ? "" : "  (" + b.note + ")") << "\n";
  }
  for (const auto& b : r.continuous_checks) os << "  " << (b.pass ? "pass" : "FAIL") << "  " << b.tag << "\n";
  for (const auto& p : r.written) os << "  wrote " << p.string() << "\n";
}

void set_param(sk::ExperimentSpec& spec, const std::string& param, const std::string& value) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw sk::ConfigError("sweep: value \"" + value + "\" is not a number");
  }
  if (param == "s") {
    spec.schedule = sk::StepSchedule::single(v);
  } else if (param == "tau" || param == "sigma") {
    if (spec.schedule.is_single()) throw sk::ConfigError("sweep: --param " + param + " needs a {tau, sigma} schedule");
    spec.schedule = param == "tau" ? sk::StepSchedule::pair(v, spec.schedule.sigma())
                                   : sk::StepSchedule::pair(spec.schedule.tau(), v);
  } else if (param == "iterations" || param == "seed") {
    if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
      throw sk::ConfigError("sweep: " + param + " must be a non-negative integer");
    if (param == "iterations") spec.iterations = static_cast<std::size_t>(v);
    else spec.seed = static_cast<std::uint64_t>(v);
  } else {
    throw sk::ConfigError("sweep: unknown --param \"" + param + "\" (expected s, tau, sigma, iterations or seed)");
  }
}

int cmd_run(const std::string& config, const std::string& out_dir) {
  const sk::ExperimentSpec spec = load_spec(config);
  const sk::ExperimentResult r = sk::run_experiment(spec, out_dir);
  print_summary(std::cout, r);
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& param, const std::vector<std::string>& values,
              const std::string& out_dir, unsigned jobs) {
  const sk::ExperimentSpec base = load_spec(config);
  if (values.empty()) throw sk::ConfigError("sweep: --values is empty");
  if (std::set<std::string>(values.begin(), values.end()).size() != values.size())
    throw sk::ConfigError("sweep: --values contains duplicates");
  std::vector<sk::ExperimentSpec> specs;
  for (const auto& v : values) {
    specs.push_back(base);
    set_param(specs.back(), param, v);
  }

  struct Outcome {
    int code = 0;
    std::string message;
  };
  auto run_point = [&](std::size_t i) {
    const fs::path dir = fs::path(out_dir) / (param + "=" + values[i]);
    try {
      const auto r = sk::run_experiment(specs[i], dir);
      std::ostringstream msg;
      msg << "ok, " << r.trace.size() - 1 << " iterations -> " << dir.string();
      return Outcome{0, msg.str()};
    } catch (const sk::Error& e) {
      return Outcome{exit_code(e), e.what()};
    }
  };

  std::vector<Outcome> outcomes(values.size());
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < values.size(); start += jobs) {
    std::vector<std::future<Outcome>> batch;
    for (std::size_t i = start; i < std::min<std::size_t>(values.size(), start + jobs); ++i)
      batch.push_back(std::async(std::launch::async, run_point, i));
    for (std::size_t i = 0; i < batch.size(); ++i) outcomes[start + i] = batch[i].get();
  }
  int worst = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::cout << param << "=" << values[i] << ": " << outcomes[i].message << "\n";
    worst = std::max(worst, outcomes[i].code);
  }
  return worst;
}

int cmd_counterexample(const std::string& algorithm, double s, std::size_t steps, const std::string& csv,
                       const std::string& svg) {
  const sk::SaddleProblem p = sk::make_counterexample();
  const sk::Algorithm algo = sk::parse_algorithm(algorithm);
  sk::RunOptions ro;
  ro.demonstration = algo == sk::Algorithm::kArrowHurwicz;
  const sk::StepSchedule sched = sk::StepSchedule::single(s);
  sk::Trace trace = sk::run(p, algo, sched, sk::Vector{0.0}, sk::Vector{1.0}, steps, ro);
  const sk::SaddleCertificate cert = sk::saddle_oracle(p);
  sk::analyze(trace, p, sched, &cert, sk::Anchor::arbitrary(sk::Vector{0.0}, sk::Vector{0.0}));
  const std::string text = sk::to_csv(sk::trace_table(trace));
  if (csv.empty() || csv == "-") std::cout << text;
  else sk::write_atomic(csv, text);
  if (!svg.empty()) {
    sk::PlotSpec ps;
    ps.columns = {"x_0", "y_0"};
    ps.title = std::string(sk::to_string(algo)) + ", s = " + sk::format_number(s);
    ps.x_label = "x";
    ps.y_label = "y";
    sk::emit_svg(trace, ps, svg, std::make_pair(1.0, 1.0));
  }
  return 0;
}

int cmd_ode_compare(const std::string& config, double tol) {
  const sk::ExperimentSpec spec = load_spec(config);
  const sk::OdeComparison c = sk::ode_compare(spec);
  std::cout << "max deviation " << sk::format_number(c.max_deviation) << " over " << c.steps << " steps";
  if (c.steps > 0) std::cout << " (largest at step " << c.worst_step << ")";
  std::cout << "\n";
  if (!(c.max_deviation <= tol)) {
    std::cerr << "saddlekit: deviation exceeds tolerance " << sk::format_number(tol) << "\n";
    return kExitNumerical;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saddle-point solvers, ODE models and Lyapunov diagnostics"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";

  auto* run = app.add_subcommand("run", "Run one experiment config and write its artifacts");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_option("--out-dir", out_dir, "Directory for relative output paths");

  std::string param;
  std::vector<std::string> values;
  unsigned jobs = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a config over a list of parameter values");
  sweep->add_option("config", config, "Experiment config (JSON)")->required();
  sweep->add_option("--param", param, "Parameter to vary: s, tau, sigma, iterations, seed")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--out-dir", out_dir, "Parent directory; each point writes to <param>=<value>/");
  sweep->add_option("--jobs", jobs, "Points run concurrently (0 = hardware threads)");

  std::string algorithm = "arrow-hurwicz";
  double s = 1.0;
  std::size_t steps = 6;
  std::string csv;
  std::string svg;
  auto* counter = app.add_subcommand("counterexample", "Iterate on x - xy + y from (0, 1); CSV to stdout");
  counter->add_option("--algorithm", algorithm, "arrow-hurwicz or pdhg")->required();
  counter->add_option("--s", s, "Step size")->required();
  counter->add_option("--steps", steps, "Number of iterations")->required();
  counter->add_option("--csv", csv, "Write the CSV here instead of stdout");
  counter->add_option("--svg", svg, "Also plot the orbit");

  double tol = 1e-9;
  auto* ode = app.add_subcommand("ode-compare", "Compare PDHG with implicit Euler on the high-resolution ODE");
  ode->add_option("config", config, "Experiment config (JSON)")->required();
  ode->add_option("--tol", tol, "Largest acceptable deviation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, out_dir);
    if (*sweep) return cmd_sweep(config, param, values, out_dir, jobs);
    if (*counter) return cmd_counterexample(algorithm, s, steps, csv, svg);
    if (*ode) return cmd_ode_compare(config, tol);
  } catch (const sk::Error& e) {
    std::cerr << "saddlekit: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "saddlekit: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
