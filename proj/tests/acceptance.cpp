// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "saddlekit/diagnostics.hpp"
#include "saddlekit/ode.hpp"

using namespace saddlekit;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

Vector gaussian(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (double& e : v) e = g(rng);
  return v;
}

Matrix gaussian_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

const BoundCheck* find_check(const std::vector<BoundCheck>& checks, const std::string& tag) {
  for (const auto& c : checks)
    if (c.tag == tag) return &c;
  return nullptr;
}

SaddleProblem lasso_identity() {
  return make_generalized_lasso(Matrix::identity(2), Vector{1, 1}, 0.5, Matrix::identity(2));
}

// Soft-threshold closed form for A = F = I.
Vector lasso_identity_oracle() {
  const Vector b{1, 1};
  Vector x(2);
  for (std::size_t i = 0; i < 2; ++i) x[i] = std::copysign(std::max(std::abs(b[i]) - 0.5, 0.0), b[i]);
  return x;
}

Outcome six_point_orbit() {
  Outcome o;
  const SaddleProblem p = make_counterexample();
  const auto start = Clock::now();
  const Trace t = run(p, Algorithm::kArrowHurwicz, StepSchedule::single(1.0), Vector{0}, Vector{1}, 6);
  const double ms = elapsed_ms(start);
  const double expected[7][2] = {{0, 1}, {0, 2}, {1, 2}, {2, 1}, {2, 0}, {1, 0}, {0, 1}};
  for (std::size_t k = 0; k < 7; ++k) {
    o.require(t.records[k].x[0] == expected[k][0] && t.records[k].y[0] == expected[k][1],
              "point " + std::to_string(k) + " off the orbit");
  }
  const double period_err = std::abs(t.records[6].x[0] - t.records[0].x[0]) +
                            std::abs(t.records[6].y[0] - t.records[0].y[0]);
  o.require(period_err <= 1e-12, "period-6 residual too large");
  o.require(ms < 1.0, "runtime " + std::to_string(ms) + " ms");
  o.detail << (o.pass ? "" : " | ") << "period residual " << period_err << ", " << ms << " ms";
  return o;
}

Outcome persistence_window() {
  Outcome o;
  const SaddleProblem p = make_counterexample();
  RunOptions demo;
  demo.demonstration = true;
  double worst_q = 0.0;
  double closest = 1e300;
  for (double s : {0.5, 1.5}) {
    const Trace t = run(p, Algorithm::kArrowHurwicz, StepSchedule::single(s), Vector{0}, Vector{1}, 10000, demo);
    auto q = [s](const TraceRecord& r) {
      const double u = r.x[0] - 1.0;
      const double v = r.y[0] - 1.0;
      return u * u + v * v + s * u * v;
    };
    const double q0 = q(t.records.front());
    for (const auto& r : t.records) {
      worst_q = std::max(worst_q, std::abs(q(r) - q0));
      closest = std::min(closest, std::hypot(r.x[0] - 1.0, r.y[0] - 1.0));
    }
  }
  o.require(worst_q <= 1e-10, "Q drift");
  o.require(closest > 0.3, "orbit entered the 0.3-ball");
  bool diverged = false;
  std::size_t last_finite = 0;
  try {
    run(p, Algorithm::kArrowHurwicz, StepSchedule::single(2.05), Vector{0}, Vector{1}, 10000, demo);
  } catch (const DivergenceError& e) {
    diverged = true;
    last_finite = e.last_finite_index();
  }
  o.require(diverged, "s=2.05 did not diverge within 1e4 steps");
  o.detail << (o.pass ? "" : " | ") << "max |dQ| " << worst_q << ", min dist " << closest
           << ", s=2.05 diverged after k=" << last_finite;
  return o;
}

Outcome pdhg_fixes_counterexample() {
  Outcome o;
  const SaddleProblem p = make_counterexample();
  const StepSchedule sched = StepSchedule::single(1.0);
  const Trace t = run(p, Algorithm::kPdhg, sched, Vector{0}, Vector{1}, 100);
  o.require(!(t.records[1].x[0] == 1.0 && t.records[1].y[0] == 1.0), "reached (1,1) before k=2");
  for (std::size_t k = 2; k < t.size(); ++k)
    o.require(t.records[k].x[0] == 1.0 && t.records[k].y[0] == 1.0, "left (1,1) at k=" + std::to_string(k));
  // Saddle-anchored Lyapunov by hand: u^2/2 + v^2/2 + u v with F = -1.
  std::vector<double> energy;
  for (const auto& r : t.records) {
    const double u = r.x[0] - 1.0;
    const double v = r.y[0] - 1.0;
    energy.push_back(0.5 * u * u + 0.5 * v * v + u * v);
  }
  o.require(monotonicity_verdict(energy, 1e-12).pass, "Lyapunov increased");
  o.detail << (o.pass ? "" : " | ") << "E(0)=" << energy.front() << ", E(2)=" << energy[2];
  return o;
}

double implicit_vs_pdhg(const SaddleProblem& p, double s, const Vector& x0, const Vector& y0) {
  const OdeSystem sys = OdeSystem::high_res(p, s);
  const Trace t = run(p, Algorithm::kPdhg, StepSchedule::single(s), x0, y0, 100);
  ContinuousState st{0.0, x0, y0};
  double worst = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    st = implicit_euler_step(sys, st, s);
    worst = std::max({worst, norm_inf(st.X - t.records[k].x), norm_inf(st.Y - t.records[k].y)});
  }
  return worst;
}

Outcome implicit_euler_equivalence() {
  Outcome o;
  const double ce = implicit_vs_pdhg(make_counterexample(), 1.0, Vector{0}, Vector{1});
  const SaddleProblem q = make_random_quadratic(5, 5, 2024);
  const double qq = implicit_vs_pdhg(q, 0.9 / q.norm_F, Vector{1, -1, 2, 0, 3}, Vector{0, 1, 0, -1, 0});
  o.require(ce <= 1e-10, "counterexample deviation");
  o.require(qq <= 1e-10, "5x5 quadratic deviation");
  o.detail << (o.pass ? "" : " | ") << "max deviation " << ce << " (counterexample), " << qq << " (5x5)";
  return o;
}

Outcome hamiltonian_circle() {
  Outcome o;
  o.require(hamiltonian(ContinuousState{0, Vector{0}, Vector{1}}) == -0.5, "H(0,1) != -0.5");
  o.require(hamiltonian(ContinuousState{0, Vector{1}, Vector{1}}) == -1.0, "H(1,1) != -1");
  const OdeSystem sys = OdeSystem::low_res(make_counterexample());
  // dt = 1e-3 rounded so that the grid ends exactly at t = 2 pi.
  const auto steps = static_cast<std::size_t>(std::llround(2.0 * std::numbers::pi / 1e-3));
  const double dt = 2.0 * std::numbers::pi / static_cast<double>(steps);
  const auto traj = rk4_trajectory(sys, ContinuousState{0, Vector{0}, Vector{1}}, dt, steps);
  double drift = 0.0;
  for (const auto& st : traj) drift = std::max(drift, std::abs(hamiltonian(st) + 0.5));
  const double closure = std::hypot(traj.back().X[0] - 0.0, traj.back().Y[0] - 1.0);
  o.require(drift <= 1e-6, "H drift");
  o.require(closure <= 1e-6, "circle not closed");
  o.detail << (o.pass ? "" : " | ") << "H drift " << drift << ", closure error " << closure;
  return o;
}

Outcome ergodic_gap_bound() {
  Outcome o;
  const SaddleProblem p = make_counterexample();
  const SaddleCertificate c = saddle_oracle(p);
  const auto start = Clock::now();
  const Trace t = run(p, Algorithm::kPdhg, StepSchedule::single(1.0), Vector{0}, Vector{1}, 1000);
  const auto checks = theorem_bound_check(t, p, StepSchedule::single(1.0), &c);
  const double ms = elapsed_ms(start);
  const BoundCheck* gap = find_check(checks, "ergodic-vi-gap-saddle");
  o.require(gap && gap->pass, "library bound check failed");
  // Independent evaluation: f = x, g* = -y, F = -1, probe (1, 1).
  double sx = 0.0;
  double sy = 0.0;
  double worst = -1e300;
  for (std::size_t n = 1; n <= 1000; ++n) {
    sx += t.records[n].x[0];
    sy += t.records[n].y[0];
    const double ax = sx / static_cast<double>(n);
    const double ay = sy / static_cast<double>(n);
    const double g = (ax - 1.0) + (-ay + 1.0) + (-(ax - 1.0)) * 1.0 - (-1.0) * (ay - 1.0);
    const double rhs = 1.0 / (2.0 * static_cast<double>(n));
    worst = std::max(worst, g - rhs);
  }
  o.require(worst <= 1e-12, "gap above 1/(2N)");
  o.require(ms < 50.0, "runtime " + std::to_string(ms) + " ms");
  o.detail << (o.pass ? "" : " | ") << "max(gap - 1/(2N)) " << worst << ", " << ms << " ms";
  return o;
}

Outcome ne_rates_on_lasso() {
  Outcome o;
  std::mt19937_64 rng(7);
  double worst_slope = -1e300;
  double slowest = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const std::size_t n = 6 + static_cast<std::size_t>(inst);
    const SaddleProblem p = make_generalized_lasso(gaussian_matrix(rng, 2 * n, n), gaussian(rng, 2 * n), 0.3,
                                                   inst % 2 == 0 ? difference_matrix(n) : Matrix::identity(n));
    const auto start = Clock::now();
    const SaddleCertificate c = saddle_oracle(p);
    const StepSchedule sched = StepSchedule::single(0.9 / p.norm_F);
    Trace t = run(p, Algorithm::kPdhg, sched, gaussian(rng, n, 2.0), Vector(p.d2()), 200);
    const DiagnosticsReport rep = analyze(t, p, sched, &c, Anchor::saddle(c));
    const double ms = elapsed_ms(start);
    slowest = std::max(slowest, ms);
    const std::string tag = "instance " + std::to_string(inst);
    o.require(rep.monotone_ne.pass, tag + " NE increased");
    const BoundCheck* last = find_check(rep.bound_checks, "ne-last-iterate");
    o.require(last && last->pass, tag + " last-iterate bound");
    o.require(rep.rate_slope_ne.has_value(), tag + " rate fit unavailable");
    if (rep.rate_slope_ne) {
      worst_slope = std::max(worst_slope, *rep.rate_slope_ne);
      o.require(*rep.rate_slope_ne <= -0.85, tag + " slope " + std::to_string(*rep.rate_slope_ne));
    }
    o.require(ms < 1000.0, tag + " runtime");
  }
  o.detail << (o.pass ? "" : " | ") << "5 instances, worst slope " << worst_slope << ", slowest " << slowest << " ms";
  return o;
}

Outcome strong_convexity_average() {
  Outcome o;
  const SaddleProblem p = lasso_identity();
  const Vector x_star = lasso_identity_oracle();
  const StepSchedule sched = StepSchedule::single(0.5);
  const Trace t = run(p, Algorithm::kPdhg, sched, Vector(2), Vector(2), 1000);
  o.require(p.mu == 1.0, "mu != 1");
  // E(0) about (x*, y*) = ((0.5, 0.5), (0.5, 0.5)) from the origin, F = I.
  const Vector y_star{0.5, 0.5};
  const Vector dx = Vector(2) - x_star;
  const Vector dy = Vector(2) - y_star;
  const double e0 = norm_sq(dx) / (2 * 0.5) + norm_sq(dy) / (2 * 0.5) - dot(dx, dy);
  Vector sum(2);
  double worst = -1e300;
  for (std::size_t n = 1; n <= 1000; ++n) {
    sum += t.records[n].x;
    const double lhs = norm_sq((1.0 / static_cast<double>(n)) * sum - x_star);
    const double rhs = 2.0 * e0 / (p.mu * static_cast<double>(n));
    worst = std::max(worst, lhs - rhs * (1.0 + 1e-9) - 1e-12);
  }
  o.require(worst <= 0.0, "averaged primal bound violated");
  const double limit = norm_inf(t.back().x - x_star);
  o.require(limit <= 1e-8, "solver limit off the oracle");
  o.detail << (o.pass ? "" : " | ") << "max(lhs - rhs) " << worst << ", |x_N - x*| " << limit;
  return o;
}

Outcome general_schedule() {
  Outcome o;
  const SaddleProblem p = lasso_identity();
  const SaddleCertificate c = saddle_oracle(p);
  const StepSchedule sched = StepSchedule::pair(0.25, 2.0);
  const double product = 0.25 * 2.0 * p.norm_F * p.norm_F;
  o.require(product < 1.0, "tau sigma ||F||^2 >= 1");
  Trace t = run(p, Algorithm::kGeneralPdhg, sched, Vector{-2, 3}, Vector(2), 1000);
  const DiagnosticsReport rep = analyze(t, p, sched, &c, Anchor::saddle(c));
  std::size_t evaluated = 0;
  for (const auto& b : rep.bound_checks) {
    o.require(b.pass, b.tag);
    if (b.note.empty()) ++evaluated;
  }
  const StepSchedule same = StepSchedule::single(0.7);
  const Trace a = run(p, Algorithm::kPdhg, same, Vector{-2, 3}, Vector(2), 300);
  const Trace g = run(p, Algorithm::kGeneralPdhg, StepSchedule::pair(0.7, 0.7), Vector{-2, 3}, Vector(2), 300);
  bool identical = a.size() == g.size();
  for (std::size_t k = 0; identical && k < a.size(); ++k)
    identical = a.records[k].x == g.records[k].x && a.records[k].y == g.records[k].y;
  o.require(identical, "general PDHG with tau = sigma differs from PDHG");
  o.detail << (o.pass ? "" : " | ") << "tau*sigma*||F||^2 = " << product << ", " << evaluated
           << " bound checks evaluated, bit-identical=" << (identical ? "yes" : "no");
  return o;
}

// Brute-force 2D argmin: 1e-2 grid on [-5, 5]^2, refined at 1e-3.
std::pair<double, double> grid_argmin(const std::function<double(double, double)>& obj) {
  double best = std::numeric_limits<double>::infinity();
  double bx = 0.0;
  double by = 0.0;
  auto scan = [&](double x0, double y0, int n, double h) {
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        const double x = x0 + i * h;
        const double y = y0 + j * h;
        const double v = obj(x, y);
        if (v < best) {
          best = v;
          bx = x;
          by = y;
        }
      }
  };
  scan(-5.0, -5.0, 1000, 1e-2);
  const double cx = std::round(bx * 100.0) / 100.0;
  const double cy = std::round(by * 100.0) / 100.0;
  best = std::numeric_limits<double>::infinity();
  scan(cx - 0.03, cy - 0.03, 60, 1e-3);
  return {bx, by};
}

Outcome property_suites() {
  Outcome o;
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::size_t> dim(1, 10);
  std::uniform_real_distribution<double> pos(0.1, 3.0);
  std::uniform_real_distribution<double> step(0.01, 5.0);

  std::size_t firm_fail = 0;
  for (int c = 0; c < 10000; ++c) {
    const std::size_t n = dim(rng);
    const Matrix a = gaussian_matrix(rng, n + 1, n);
    const Matrix e = gaussian_matrix(rng, 1, n);
    const FunctionDescriptor kinds[] = {FunctionDescriptor::least_squares(a, gaussian(rng, n + 1)),
                                        FunctionDescriptor::scaled_l1(pos(rng)), FunctionDescriptor::linf_ball(pos(rng)),
                                        FunctionDescriptor::affine(e, matvec(e, gaussian(rng, n))),
                                        FunctionDescriptor::linear(gaussian(rng, n))};
    const FunctionDescriptor& d = kinds[c % 5];
    const double s = step(rng);
    const Vector u = gaussian(rng, n, 3.0);
    const Vector v = gaussian(rng, n, 3.0);
    const Vector dp = prox(d, s, u) - prox(d, s, v);
    if (norm_sq(dp) > dot(dp, u - v) + 1e-9 * (1.0 + norm_sq(u - v))) ++firm_fail;
  }
  o.require(firm_fail == 0, std::to_string(firm_fail) + " firm-nonexpansiveness failures");

  std::size_t moreau_fail = 0;
  for (int c = 0; c < 10000; ++c) {
    const std::size_t n = dim(rng);
    const FunctionDescriptor d = c % 2 == 0 ? FunctionDescriptor::scaled_l1(pos(rng))
                                            : FunctionDescriptor::linf_ball(pos(rng));
    const double s = step(rng);
    const Vector v = gaussian(rng, n, 3.0);
    const Vector back = prox(d, s, v) + s * prox(conjugate(d), 1.0 / s, (1.0 / s) * v);
    if (norm_inf(back - v) > 1e-9 * (1.0 + norm_inf(v))) ++moreau_fail;
  }
  o.require(moreau_fail == 0, std::to_string(moreau_fail) + " Moreau identity failures");

  std::size_t sign_fail = 0;
  for (int c = 0; c < 10000; ++c) {
    const std::size_t d1 = dim(rng);
    const std::size_t d2 = dim(rng);
    const SaddleProblem p = SaddleProblem::make("fuzz", FunctionDescriptor::zero(d1), FunctionDescriptor::zero(d2),
                                                gaussian_matrix(rng, d2, d1));
    const double budget = std::uniform_real_distribution<double>(0.05, 1.0)(rng) / p.norm_F;
    const double ratio = std::exp(std::uniform_real_distribution<double>(-2.0, 2.0)(rng));
    const StepSchedule sched = c % 2 == 0 ? StepSchedule::single(budget)
                                          : StepSchedule::pair(budget * ratio, budget / ratio);
    const Anchor a = Anchor::arbitrary(gaussian(rng, d1, 3.0), gaussian(rng, d2, 3.0));
    const Vector x = gaussian(rng, d1, 3.0);
    const Vector y = gaussian(rng, d2, 3.0);
    if (lyapunov(p, x, y, a, sched) < -1e-12 || numerical_error(p, a.x, a.y, x, y, sched) < -1e-12) ++sign_fail;
  }
  o.require(sign_fail == 0, std::to_string(sign_fail) + " negative Lyapunov/NE values");

  double grid_err = 0.0;
  const FunctionDescriptor planar[] = {FunctionDescriptor::least_squares(Matrix{{1, 2}, {0.5, -1}}, Vector{1, -1}),
                                       FunctionDescriptor::scaled_l1(0.7), FunctionDescriptor::linf_ball(1.25),
                                       FunctionDescriptor::linear(Vector{0.4, -0.9})};
  std::uniform_real_distribution<double> pt(-3.0, 3.0);
  for (const auto& d : planar) {
    const Vector v{pt(rng), pt(rng)};
    const double s = 0.8;
    const auto [gx, gy] = grid_argmin([&](double x, double y) {
      return eval(d, Vector{x, y}) + ((x - v[0]) * (x - v[0]) + (y - v[1]) * (y - v[1])) / (2.0 * s);
    });
    const Vector u = prox(d, s, v);
    grid_err = std::max({grid_err, std::abs(u[0] - gx), std::abs(u[1] - gy)});
  }
  o.require(grid_err <= 2e-3, "grid oracle disagreement");

  bool continuous_ok = true;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SaddleProblem p = make_random_quadratic(3, 3, seed);
    const SaddleCertificate c = saddle_oracle(p);
    const OdeSystem sys = OdeSystem::high_res(p, 0.5 / p.norm_F);
    const auto traj = rk4_trajectory(sys, ContinuousState{0, Vector(3, 2.0), Vector(3, -1.0)}, 1e-2, 2000);
    for (const auto& b : continuous_bound_checks(sys, traj, c, 1e-8)) continuous_ok = continuous_ok && b.pass;
  }
  o.require(continuous_ok, "sampled continuous Lyapunov not monotone");
  o.detail << (o.pass ? "" : " | ") << "3x1e4 fuzz cases clean, grid error " << grid_err
           << ", continuous checks " << (continuous_ok ? "ok" : "failed");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*fn)();
  };
  const Criterion criteria[] = {
      {"six-point Arrow-Hurwicz orbit", six_point_orbit},
      {"persistence window and divergence guard", persistence_window},
      {"PDHG converges on the counterexample", pdhg_fixes_counterexample},
      {"implicit Euler equals PDHG", implicit_euler_equivalence},
      {"Hamiltonian values and RK4 circle", hamiltonian_circle},
      {"ergodic VI gap <= 1/(2N)", ergodic_gap_bound},
      {"NE monotone, last-iterate bound, O(1/N) fit", ne_rates_on_lasso},
      {"averaged primal bound under strong convexity", strong_convexity_average},
      {"general schedule bounds and tau = sigma identity", general_schedule},
      {"property suites", property_suites},
  };
  int failures = 0;
  int index = 1;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::printf("criterion %2d %s  %s: %s\n", index++, o.pass ? "PASS" : "FAIL", c.name, o.detail.str().c_str());
    if (!o.pass) ++failures;
  }
  std::printf("%d/%d criteria passed\n", 10 - failures, 10);
  return failures == 0 ? 0 : 1;
}
