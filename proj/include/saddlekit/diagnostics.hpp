#pragma once

// Lyapunov, numerical-error and variational-inequality gap diagnostics, the
// O(1/N) bound checks for PDHG traces, monotonicity verdicts and rate fits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "saddlekit/error.hpp"
#include "saddlekit/functions.hpp"
#include "saddlekit/linalg.hpp"
#include "saddlekit/ode.hpp"
#include "saddlekit/problems.hpp"
#include "saddlekit/solvers.hpp"

namespace saddlekit {

struct Anchor {
  enum class Kind { kArbitrary, kSaddle };
  Vector x;
  Vector y;
  Kind kind = Kind::kArbitrary;

  static Anchor arbitrary(Vector x, Vector y) { return Anchor{std::move(x), std::move(y), Kind::kArbitrary}; }
  static Anchor saddle(const SaddleCertificate& c) { return Anchor{c.x_star, c.y_star, Kind::kSaddle}; }
};

namespace detail {

inline void check_pair(const SaddleProblem& p, const Vector& x, const Vector& y, const char* what) {
  if (x.size() != p.d1() || y.size() != p.d2()) {
    std::ostringstream msg;
    msg << what << ": point dimensions (" << x.size() << ", " << y.size() << ") do not match problem (" << p.d1()
        << ", " << p.d2() << ")";
    throw DimensionError(msg.str());
  }
}

// ||dx||^2/(2 tau) + ||dy||^2/(2 sigma) - <F dx, dy>
inline double weighted_form(const SaddleProblem& p, const Vector& dx, const Vector& dy, double tau, double sigma) {
  return norm_sq(dx) / (2.0 * tau) + norm_sq(dy) / (2.0 * sigma) - dot(matvec(p.F, dx), dy);
}

}  // namespace detail

// ||x - a_x||^2/(2 tau) + ||y - a_y||^2/(2 sigma) - <F(x - a_x), y - a_y>
inline double lyapunov(const SaddleProblem& p, const Vector& x, const Vector& y, const Anchor& anchor,
                       const StepSchedule& sched) {
  detail::check_pair(p, x, y, "lyapunov");
  detail::check_pair(p, anchor.x, anchor.y, "lyapunov anchor");
  return detail::weighted_form(p, x - anchor.x, y - anchor.y, sched.tau(), sched.sigma());
}

// Same quadratic form on the increment (x_{k+1} - x_k, y_{k+1} - y_k).
inline double numerical_error(const SaddleProblem& p, const Vector& x_prev, const Vector& y_prev, const Vector& x_next,
                              const Vector& y_next, const StepSchedule& sched) {
  detail::check_pair(p, x_prev, y_prev, "numerical_error");
  detail::check_pair(p, x_next, y_next, "numerical_error");
  return detail::weighted_form(p, x_next - x_prev, y_next - y_prev, sched.tau(), sched.sigma());
}

// f(xc) - f(x) + g*(yc) - g*(y) + <F(xc - x), y> - <F x, yc - y>.
// Indicator values propagate: the result may be +/-inf or NaN.
inline double vi_gap(const SaddleProblem& p, const Vector& xc, const Vector& yc, const Vector& x, const Vector& y) {
  detail::check_pair(p, xc, yc, "vi_gap candidate");
  detail::check_pair(p, x, y, "vi_gap probe");
  if (xc == x && yc == y) return 0.0;
  const Vector fx = matvec(p.F, x);
  return eval(p.f, xc) - eval(p.f, x) + eval(p.gstar, yc) - eval(p.gstar, y) + dot(matvec(p.F, xc - x), y) -
         dot(fx, yc - y);
}

struct Verdict {
  bool pass = true;
  std::optional<std::size_t> first_violation;
};

// pass iff series[k+1] <= series[k] + tol * max(1, |series[k]|) for all k.
inline Verdict monotonicity_verdict(const std::vector<double>& series, double tol) {
  for (std::size_t k = 0; k + 1 < series.size(); ++k) {
    if (!(series[k + 1] <= series[k] + tol * std::max(1.0, std::abs(series[k])))) return Verdict{false, k};
  }
  return Verdict{};
}

// Least-squares slope of log(series[k]) against log(k) over k >= max(k_min, 1);
// nonpositive or non-finite entries are skipped.
inline double rate_fit(const std::vector<double>& series, std::size_t k_min) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = std::max<std::size_t>(k_min, 1); k < series.size(); ++k) {
    const double v = series[k];
    if (v > 0.0 && std::isfinite(v)) pts.emplace_back(std::log(static_cast<double>(k)), std::log(v));
  }
  if (pts.size() < 10) {
    throw NumericalError("rate_fit: fewer than 10 positive points (got " + std::to_string(pts.size()) + ")");
  }
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [a, b] : pts) {
    mx += a;
    my += b;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& [a, b] : pts) {
    sxx += (a - mx) * (a - mx);
    sxy += (a - mx) * (b - my);
  }
  return sxy / sxx;
}

struct BoundCheck {
  std::string tag;
  std::size_t n = 0;  // iteration index (or sample) where lhs/rhs is tightest
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = true;
  std::string note;
};

struct BoundCheckOptions {
  std::size_t random_probes = 20;
  double probe_radius = 5.0;
  std::uint64_t seed = 0;
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double descent_tol = 1e-9;
};

namespace detail {

// Accumulates (lhs, rhs) pairs and remembers the tightest one.
class BoundAccumulator {
 public:
  BoundAccumulator(std::string tag, double rel_tol, double abs_tol)
      : check_{std::move(tag), 0, 0.0, 0.0, true, {}}, rel_tol_(rel_tol), abs_tol_(abs_tol) {}

  void add(std::size_t n, double lhs, double rhs) {
    const bool ok = lhs == -std::numeric_limits<double>::infinity() || lhs <= rhs * (1.0 + rel_tol_) + abs_tol_;
    const double margin = std::isnan(lhs) ? std::numeric_limits<double>::infinity() : lhs - rhs;
    if (!seen_ || (!ok && check_.pass) || (ok == check_.pass && margin > worst_margin_)) {
      check_.n = n;
      check_.lhs = lhs;
      check_.rhs = rhs;
      worst_margin_ = margin;
      seen_ = true;
    }
    if (!ok) check_.pass = false;
  }

  BoundCheck finish(std::string vacuous_note = "vacuous: no iterations to check") {
    if (!seen_) check_.note = std::move(vacuous_note);
    return check_;
  }

 private:
  BoundCheck check_;
  double rel_tol_;
  double abs_tol_;
  double worst_margin_ = -std::numeric_limits<double>::infinity();
  bool seen_ = false;
};

inline Vector random_in_ball(std::mt19937_64& rng, std::size_t n, double radius) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector v(n);
  for (double& e : v) e = gauss(rng);
  const double nv = norm(v);
  if (nv == 0.0) return v;
  const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
  return (r / nv) * v;
}

// Saddle (if any) plus seeded probes in a ball around it; indicator probes are projected.
inline std::vector<std::pair<Vector, Vector>> vi_probes(const SaddleProblem& p, const SaddleCertificate* cert,
                                                        const BoundCheckOptions& opts) {
  std::vector<std::pair<Vector, Vector>> probes;
  const Vector cx = cert ? cert->x_star : Vector(p.d1());
  const Vector cy = cert ? cert->y_star : Vector(p.d2());
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  const bool project_x = p.f.is<IndicatorAffine>() || p.f.is<IndicatorLinfBall>();
  const bool project_y = p.gstar.is<IndicatorAffine>() || p.gstar.is<IndicatorLinfBall>();
  for (std::size_t i = 0; i < opts.random_probes; ++i) {
    const Vector d = random_in_ball(rng, p.d1() + p.d2(), opts.probe_radius);
    auto [dx, dy] = split(d, p.d1());
    Vector x = cx + dx;
    Vector y = cy + dy;
    if (project_x) x = prox(p.f, 1.0, x);
    if (project_y) y = prox(p.gstar, 1.0, y);
    probes.emplace_back(std::move(x), std::move(y));
  }
  return probes;
}

}  // namespace detail

// Evaluates the rate bounds of the discrete analysis on a PDHG / general-PDHG trace.
// Checks anchored at the saddle are skipped (with a note) when no certificate is given;
// the strong-form bounds need a strict schedule and the averaged-primal bound needs mu > 0.
inline std::vector<BoundCheck> theorem_bound_check(const Trace& trace, const SaddleProblem& p,
                                                   const StepSchedule& sched, const SaddleCertificate* cert,
                                                   const BoundCheckOptions& opts = {}) {
  std::vector<BoundCheck> out;
  if (trace.meta.algorithm == Algorithm::kArrowHurwicz) {
    out.push_back(BoundCheck{"all", 0, 0.0, 0.0, true, "skipped: rate bounds do not apply to arrow-hurwicz"});
    return out;
  }
  const auto& recs = trace.records;
  const std::size_t len = recs.size();
  const Vector& x0 = recs.front().x;
  const Vector& y0 = recs.front().y;
  const double tau = sched.tau();
  const double sigma = sched.sigma();
  const bool single = sched.is_single();
  // Scale turning the weighted forms into the printed forms: 2s or 2 tau sigma.
  const double w = single ? 2.0 * tau : 2.0 * tau * sigma;

  std::vector<double> ne(len > 0 ? len - 1 : 0);
  for (std::size_t k = 0; k + 1 < len; ++k)
    ne[k] = numerical_error(p, recs[k].x, recs[k].y, recs[k + 1].x, recs[k + 1].y, sched);

  // Ergodic averages for N = 1..len-1.
  std::vector<std::pair<Vector, Vector>> avg;
  {
    Vector sx(p.d1());
    Vector sy(p.d2());
    for (std::size_t k = 1; k < len; ++k) {
      sx += recs[k].x;
      sy += recs[k].y;
      const double inv = 1.0 / static_cast<double>(k);
      avg.emplace_back(inv * sx, inv * sy);
    }
  }

  // Weak ergodic convergence to the VI set: gap(avg_N; probe) <= E_probe(0) / N.
  auto check_probe = [&](detail::BoundAccumulator& acc, const Vector& px, const Vector& py) {
    const double e0 = lyapunov(p, x0, y0, Anchor::arbitrary(px, py), sched);
    for (std::size_t n = 1; n < len; ++n) {
      acc.add(n, vi_gap(p, avg[n - 1].first, avg[n - 1].second, px, py), e0 / static_cast<double>(n));
    }
  };
  if (cert) {
    detail::BoundAccumulator acc("ergodic-vi-gap-saddle", opts.rel_tol, opts.abs_tol);
    check_probe(acc, cert->x_star, cert->y_star);
    out.push_back(acc.finish());
  }
  {
    detail::BoundAccumulator acc("ergodic-vi-gap-probes", opts.rel_tol, opts.abs_tol);
    for (const auto& [px, py] : detail::vi_probes(p, cert, opts)) check_probe(acc, px, py);
    out.push_back(acc.finish());
  }

  if (!cert) {
    for (const char* tag : {"lyapunov-descent", "ne-average", "ne-min", "ne-last-iterate"})
      out.push_back(BoundCheck{tag, 0, 0.0, 0.0, true, "skipped: no saddle certificate"});
    return out;
  }

  const Anchor star = Anchor::saddle(*cert);
  std::vector<double> energy(len);
  for (std::size_t k = 0; k < len; ++k) energy[k] = lyapunov(p, recs[k].x, recs[k].y, star, sched);
  const double e0 = energy.front();

  {
    // E(k+1) - E(k) + NE(k) <= 0
    detail::BoundAccumulator acc("lyapunov-descent", 0.0, opts.descent_tol);
    for (std::size_t k = 0; k + 1 < len; ++k) acc.add(k, energy[k + 1] - energy[k] + ne[k], 0.0);
    out.push_back(acc.finish());
  }
  {
    detail::BoundAccumulator avg_acc("ne-average", opts.rel_tol, opts.abs_tol);
    detail::BoundAccumulator min_acc("ne-min", opts.rel_tol, opts.abs_tol);
    detail::BoundAccumulator last_acc("ne-last-iterate", opts.rel_tol, opts.abs_tol);
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < ne.size(); ++n) {
      const double term = w * ne[n];
      sum += term;
      mn = std::min(mn, term);
      const double rhs = w * e0 / static_cast<double>(n + 1);
      avg_acc.add(n, sum / static_cast<double>(n + 1), rhs);
      min_acc.add(n, mn, rhs);
      last_acc.add(n, term, rhs);
    }
    out.push_back(avg_acc.finish());
    out.push_back(min_acc.finish());
    out.push_back(last_acc.finish());
  }

  const double r = sched.effective_step() * p.norm_F;
  if (r < 1.0) {
    const double dx0 = norm_sq(x0 - cert->x_star);
    const double dy0 = norm_sq(y0 - cert->y_star);
    const double ratio = (1.0 + r) / (1.0 - r);
    detail::BoundAccumulator avg_acc("ne-average-strong", opts.rel_tol, opts.abs_tol);
    detail::BoundAccumulator min_acc("ne-min-strong", opts.rel_tol, opts.abs_tol);
    detail::BoundAccumulator last_acc("ne-last-iterate-strong", opts.rel_tol, opts.abs_tol);
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < len; ++n) {
      const double sx = norm_sq(recs[n + 1].x - recs[n].x);
      const double sy = norm_sq(recs[n + 1].y - recs[n].y);
      const double plain = sx + sy;
      sum += plain;
      mn = std::min(mn, plain);
      const double denom = static_cast<double>(n + 1);
      avg_acc.add(n, sum / denom, ratio * (dx0 + dy0) / denom);
      min_acc.add(n, mn, ratio * (dx0 + dy0) / denom);
      if (single) last_acc.add(n, plain, ratio * (dx0 + dy0) / denom);
      else last_acc.add(n, sigma * sx + tau * sy, ratio * (sigma * dx0 + tau * dy0) / denom);
    }
    out.push_back(avg_acc.finish());
    out.push_back(min_acc.finish());
    out.push_back(last_acc.finish());
  } else {
    for (const char* tag : {"ne-average-strong", "ne-min-strong", "ne-last-iterate-strong"})
      out.push_back(BoundCheck{tag, 0, 0.0, 0.0, true, "skipped: needs a strict step schedule"});
  }

  if (p.mu > 0.0) {
    // ||avg x_N - x*||^2 <= 2 E(0) / (mu N)
    detail::BoundAccumulator acc("primal-average-strong-convexity", opts.rel_tol, opts.abs_tol);
    for (std::size_t n = 1; n < len; ++n)
      acc.add(n, norm_sq(avg[n - 1].first - cert->x_star), 2.0 * e0 / (p.mu * static_cast<double>(n)));
    out.push_back(acc.finish());
  } else {
    out.push_back(BoundCheck{"primal-average-strong-convexity", 0, 0.0, 0.0, true, "skipped: f is not strongly convex"});
  }
  return out;
}

struct DiagnosticsReport {
  std::vector<double> lyapunov;         // saddle-anchored when a certificate exists, else anchor
  std::vector<double> lyapunov_anchor;  // arbitrary anchor
  std::vector<double> ne;               // NE(k), k = 0..len-2
  std::vector<double> vi_gap;           // gap(avg_N; saddle), N = 1..len-1
  std::vector<double> avg_dist_sq;      // ||avg x_N - x*||^2, N = 1..len-1
  Verdict monotone_lyapunov;
  Verdict monotone_ne;
  std::optional<double> rate_slope_ne;
  std::vector<BoundCheck> bound_checks;
  bool saddle_anchored = false;

  bool all_bounds_pass() const {
    return std::all_of(bound_checks.begin(), bound_checks.end(), [](const BoundCheck& b) { return b.pass; });
  }
};

struct AnalyzeOptions {
  double monotone_tol = 1e-9;
  std::size_t rate_k_min = 1;
  BoundCheckOptions bounds;
};

// Fills the per-record diagnostic columns of the trace and assembles the report.
inline DiagnosticsReport analyze(Trace& trace, const SaddleProblem& p, const StepSchedule& sched,
                                 const SaddleCertificate* cert, const Anchor& anchor, const AnalyzeOptions& opts = {}) {
  DiagnosticsReport rep;
  auto& recs = trace.records;
  const std::size_t len = recs.size();
  rep.saddle_anchored = cert != nullptr;
  std::optional<Anchor> star;
  if (cert) star = Anchor::saddle(*cert);

  Vector sx(p.d1());
  Vector sy(p.d2());
  for (std::size_t k = 0; k < len; ++k) {
    auto& rec = recs[k];
    rec.diag.lyapunov_anchor = lyapunov(p, rec.x, rec.y, anchor, sched);
    rep.lyapunov_anchor.push_back(rec.diag.lyapunov_anchor);
    if (star) {
      rec.diag.lyapunov_saddle = lyapunov(p, rec.x, rec.y, *star, sched);
      rep.lyapunov.push_back(rec.diag.lyapunov_saddle);
    } else {
      rep.lyapunov.push_back(rec.diag.lyapunov_anchor);
    }
    if (k > 0) {
      rec.diag.ne = numerical_error(p, recs[k - 1].x, recs[k - 1].y, rec.x, rec.y, sched);
      rep.ne.push_back(rec.diag.ne);
      sx += rec.x;
      sy += rec.y;
      if (star) {
        const double inv = 1.0 / static_cast<double>(k);
        const Vector ax = inv * sx;
        const Vector ay = inv * sy;
        rec.diag.vi_gap_saddle = vi_gap(p, ax, ay, star->x, star->y);
        rec.diag.dist_sq_avg_x = norm_sq(ax - star->x);
        rep.vi_gap.push_back(rec.diag.vi_gap_saddle);
        rep.avg_dist_sq.push_back(rec.diag.dist_sq_avg_x);
      }
    }
  }
  rep.monotone_lyapunov = monotonicity_verdict(rep.lyapunov, opts.monotone_tol);
  rep.monotone_ne = monotonicity_verdict(rep.ne, opts.monotone_tol);
  try {
    rep.rate_slope_ne = rate_fit(rep.ne, opts.rate_k_min);
  } catch (const NumericalError&) {
    rep.rate_slope_ne.reset();
  }
  rep.bound_checks = theorem_bound_check(trace, p, sched, cert, opts.bounds);
  return rep;
}

// Continuous-time analogues checked on a sampled RK4 trajectory of a (general)
// high-resolution system: monotone anchored and velocity Lyapunov functions, the
// ergodic VI-gap bound and, for mu > 0, the averaged-primal bound.
inline std::vector<BoundCheck> continuous_bound_checks(const OdeSystem& sys, const std::vector<ContinuousState>& traj,
                                                       const SaddleCertificate& cert, double monotone_tol = 1e-8,
                                                       double quadrature_tol = 1e-6) {
  if (sys.kind() == OdeSystem::Kind::kLowRes)
    throw ConfigError("continuous bound checks need a high-resolution system");
  const SaddleProblem& p = sys.problem();
  const StepSchedule sched = sys.kind() == OdeSystem::Kind::kHighRes ? StepSchedule::single(sys.s())
                                                                     : StepSchedule::pair(sys.tau(), sys.sigma());
  const Anchor star = Anchor::saddle(cert);
  std::vector<BoundCheck> out;

  std::vector<double> energy;
  std::vector<double> velocity;
  for (const auto& st : traj) {
    energy.push_back(lyapunov(p, st.X, st.Y, star, sched));
    auto [dx, dy] = field(sys, st);
    velocity.push_back(detail::weighted_form(p, dx, dy, sched.tau(), sched.sigma()));
  }
  auto monotone_check = [&](const char* tag, const std::vector<double>& series) {
    const Verdict v = monotonicity_verdict(series, monotone_tol);
    BoundCheck b{tag, 0, series.empty() ? 0.0 : series.back(), series.empty() ? 0.0 : series.front(), v.pass, {}};
    if (!v.pass) {
      b.n = *v.first_violation + 1;
      b.lhs = series[b.n];
      b.rhs = series[b.n - 1];
    }
    return b;
  };
  out.push_back(monotone_check("continuous-lyapunov-monotone", energy));
  out.push_back(monotone_check("continuous-velocity-lyapunov-monotone", velocity));

  // gap(time-average; saddle) <= s E(0) / t and ||avg X - x*||^2 <= 2 s E(0) / (mu t)
  const double e0 = energy.front();
  const double s = sys.s();
  detail::BoundAccumulator gap_acc("continuous-ergodic-vi-gap", quadrature_tol, 1e-12);
  detail::BoundAccumulator strong_acc("continuous-primal-average-strong-convexity", quadrature_tol, 1e-12);
  Vector ix(p.d1());
  Vector iy(p.d2());
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double h = 0.5 * (traj[i].t - traj[i - 1].t);
    ix += h * (traj[i].X + traj[i - 1].X);
    iy += h * (traj[i].Y + traj[i - 1].Y);
    const double t = traj[i].t - traj.front().t;
    const Vector ax = (1.0 / t) * ix;
    const Vector ay = (1.0 / t) * iy;
    gap_acc.add(i, vi_gap(p, ax, ay, cert.x_star, cert.y_star), s * e0 / t);
    if (p.mu > 0.0) strong_acc.add(i, norm_sq(ax - cert.x_star), 2.0 * s * e0 / (p.mu * t));
  }
  out.push_back(gap_acc.finish("vacuous: single sample"));
  if (p.mu > 0.0) out.push_back(strong_acc.finish("vacuous: single sample"));
  return out;
}

}  // namespace saddlekit
