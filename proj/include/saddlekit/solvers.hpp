#pragma once

// Proximal Arrow-Hurwicz, PDHG and two-parameter PDHG with a trace-producing run loop.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "saddlekit/error.hpp"
#include "saddlekit/functions.hpp"
#include "saddlekit/linalg.hpp"
#include "saddlekit/problems.hpp"

namespace saddlekit {

enum class Algorithm { kArrowHurwicz, kPdhg, kGeneralPdhg };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kArrowHurwicz: return "arrow-hurwicz";
    case Algorithm::kPdhg: return "pdhg";
    case Algorithm::kGeneralPdhg: return "general-pdhg";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(std::string_view tag) {
  if (tag == "arrow-hurwicz") return Algorithm::kArrowHurwicz;
  if (tag == "pdhg") return Algorithm::kPdhg;
  if (tag == "general-pdhg") return Algorithm::kGeneralPdhg;
  throw ConfigError("unknown algorithm tag '" + std::string(tag) +
                    "' (expected arrow-hurwicz, pdhg or general-pdhg)");
}

class StepSchedule {
 public:
  struct Single {
    double s;
    friend bool operator==(const Single&, const Single&) = default;
  };
  struct Pair {
    double tau;
    double sigma;
    friend bool operator==(const Pair&, const Pair&) = default;
  };

  static StepSchedule single(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("step size s must be finite and > 0");
    return StepSchedule(Single{s});
  }
  static StepSchedule pair(double tau, double sigma) {
    if (!(tau > 0.0) || !(sigma > 0.0) || !std::isfinite(tau) || !std::isfinite(sigma))
      throw ConfigError("step sizes tau and sigma must be finite and > 0");
    return StepSchedule(Pair{tau, sigma});
  }

  bool is_single() const noexcept { return std::holds_alternative<Single>(mode_); }
  const std::variant<Single, Pair>& mode() const noexcept { return mode_; }

  double tau() const noexcept { return is_single() ? std::get<Single>(mode_).s : std::get<Pair>(mode_).tau; }
  double sigma() const noexcept { return is_single() ? std::get<Single>(mode_).s : std::get<Pair>(mode_).sigma; }
  // s, or sqrt(tau sigma)
  double effective_step() const noexcept { return is_single() ? tau() : std::sqrt(tau() * sigma()); }

  // s^2 ||F||^2 or tau sigma ||F||^2
  double product_bound(double norm_F) const noexcept { return tau() * sigma() * norm_F * norm_F; }

  std::string describe() const {
    std::ostringstream s;
    s.precision(17);
    if (is_single()) s << "s=" << tau();
    else s << "tau=" << tau() << ",sigma=" << sigma();
    return s.str();
  }

  friend bool operator==(const StepSchedule&, const StepSchedule&) = default;

 private:
  explicit StepSchedule(std::variant<Single, Pair> mode) : mode_(mode) {}
  std::variant<Single, Pair> mode_;
};

// Rounding slack allowed on the non-strict bound.
constexpr double kStepBoundSlack = 1e-12;

inline void validate_schedule(const SaddleProblem& p, const StepSchedule& sched, bool strict) {
  const double bound = sched.product_bound(p.norm_F);
  const bool ok = strict ? bound < 1.0 : bound <= 1.0 + kStepBoundSlack;
  if (ok) return;
  const double value = std::sqrt(bound);
  std::ostringstream msg;
  msg.precision(17);
  if (sched.is_single()) msg << "step bound violated: s*||F|| = " << value;
  else msg << "step bound violated: sqrt(tau*sigma)*||F|| = " << value;
  msg << (strict ? " (must be < 1)" : " (must be <= 1)");
  throw StepBoundError(msg.str(), value);
}

struct SolverState {
  std::size_t k = 0;
  Vector x;
  Vector y;
  Vector x_prev;
  Vector sum_x;  // sum of x_1..x_k
  Vector sum_y;

  static SolverState initial(Vector x0, Vector y0) {
    SolverState st;
    st.x_prev = x0;
    st.sum_x = Vector(x0.size());
    st.sum_y = Vector(y0.size());
    st.x = std::move(x0);
    st.y = std::move(y0);
    return st;
  }

  // Iterative averages (1/k) sum_{j=1..k}; undefined (empty) for k = 0.
  std::optional<std::pair<Vector, Vector>> averages() const {
    if (k == 0) return std::nullopt;
    const double inv = 1.0 / static_cast<double>(k);
    return std::make_pair(inv * sum_x, inv * sum_y);
  }
};

namespace detail {

inline void check_state(const SaddleProblem& p, const SolverState& st) {
  if (st.x.size() != p.d1() || st.y.size() != p.d2()) {
    std::ostringstream msg;
    msg << "state dimensions (" << st.x.size() << ", " << st.y.size() << ") do not match problem (" << p.d1() << ", "
        << p.d2() << ")";
    throw DimensionError(msg.str());
  }
}

inline SolverState advance(const SolverState& st, Vector x_next, Vector y_next) {
  SolverState out;
  out.k = st.k + 1;
  out.x_prev = st.x;
  out.sum_x = st.sum_x + x_next;
  out.sum_y = st.sum_y + y_next;
  out.x = std::move(x_next);
  out.y = std::move(y_next);
  return out;
}

}  // namespace detail

// x+ = prox_{s f}(x - s F^T y);  y+ = prox_{s g*}(y + s F x+)
inline SolverState arrow_hurwicz_step(const SaddleProblem& p, const SolverState& st, double s) {
  detail::check_state(p, st);
  Vector x_next = prox(p.f, s, st.x - s * matvec_transposed(p.F, st.y));
  Vector y_next = prox(p.gstar, s, st.y + s * matvec(p.F, x_next));
  return detail::advance(st, std::move(x_next), std::move(y_next));
}

// Arrow-Hurwicz plus the momentum point xbar = x+ + (x+ - x) in the dual update.
inline SolverState pdhg_step(const SaddleProblem& p, const SolverState& st, double s) {
  detail::check_state(p, st);
  Vector x_next = prox(p.f, s, st.x - s * matvec_transposed(p.F, st.y));
  const Vector x_bar = x_next + (x_next - st.x);
  Vector y_next = prox(p.gstar, s, st.y + s * matvec(p.F, x_bar));
  return detail::advance(st, std::move(x_next), std::move(y_next));
}

inline SolverState general_pdhg_step(const SaddleProblem& p, const SolverState& st, double tau, double sigma) {
  detail::check_state(p, st);
  Vector x_next = prox(p.f, tau, st.x - tau * matvec_transposed(p.F, st.y));
  const Vector x_bar = x_next + (x_next - st.x);
  Vector y_next = prox(p.gstar, sigma, st.y + sigma * matvec(p.F, x_bar));
  return detail::advance(st, std::move(x_next), std::move(y_next));
}

// Per-record diagnostic columns; NaN when not computed.
struct RecordDiagnostics {
  double lyapunov_saddle = std::numeric_limits<double>::quiet_NaN();
  double lyapunov_anchor = std::numeric_limits<double>::quiet_NaN();
  double ne = std::numeric_limits<double>::quiet_NaN();  // step k-1 -> k
  double vi_gap_saddle = std::numeric_limits<double>::quiet_NaN();
  double dist_sq_avg_x = std::numeric_limits<double>::quiet_NaN();
};

struct TraceRecord {
  std::size_t k = 0;
  Vector x;
  Vector y;
  RecordDiagnostics diag;
};

struct TraceMetadata {
  std::uint64_t problem_hash = 0;
  StepSchedule schedule = StepSchedule::single(1.0);
  Algorithm algorithm = Algorithm::kPdhg;
  std::uint64_t seed = 0;
};

struct Trace {
  TraceMetadata meta;
  std::vector<TraceRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  const TraceRecord& back() const { return records.back(); }
};

namespace detail {

inline void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
}
inline void fnv_mix(std::uint64_t& h, double v) { fnv_mix(h, &v, sizeof v); }
inline void fnv_mix(std::uint64_t& h, const std::string& s) { fnv_mix(h, s.data(), s.size()); }
inline void fnv_mix(std::uint64_t& h, const Vector& v) {
  for (double e : v) fnv_mix(h, e);
}
inline void fnv_mix(std::uint64_t& h, const Matrix& m) {
  fnv_mix(h, static_cast<double>(m.rows()));
  for (double e : m.entries()) fnv_mix(h, e);
}

inline void fnv_mix(std::uint64_t& h, const FunctionDescriptor& d) {
  fnv_mix(h, d.kind_name());
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Quadratic>) {
          fnv_mix(h, k.P);
          fnv_mix(h, k.q);
          fnv_mix(h, k.c);
        } else if constexpr (std::is_same_v<K, ScaledL1>) {
          fnv_mix(h, k.lambda);
        } else if constexpr (std::is_same_v<K, Linear>) {
          fnv_mix(h, k.c);
        } else if constexpr (std::is_same_v<K, IndicatorLinfBall>) {
          fnv_mix(h, k.radius);
        } else if constexpr (std::is_same_v<K, IndicatorAffine>) {
          fnv_mix(h, k.A);
          fnv_mix(h, k.b);
        } else {
          fnv_mix(h, static_cast<double>(k.dim));
        }
      },
      d.kind());
}

}  // namespace detail

// FNV-1a over the problem's name, descriptors and coupling matrix.
inline std::uint64_t problem_hash(const SaddleProblem& p) {
  std::uint64_t h = 14695981039346656037ULL;
  detail::fnv_mix(h, p.name);
  detail::fnv_mix(h, p.f);
  detail::fnv_mix(h, p.gstar);
  detail::fnv_mix(h, p.F);
  return h;
}

// Called once per record, after it is appended; prev is null for k = 0.
using TraceHook = std::function<void(const SaddleProblem&, const SolverState* prev, const SolverState& cur, TraceRecord&)>;

struct RunOptions {
  bool demonstration = false;  // lets Arrow-Hurwicz run outside the step bound
  std::optional<double> early_stop_ne;
  double divergence_threshold = 1e12;
  std::uint64_t seed = 0;
  std::vector<TraceHook> hooks;
};

inline SolverState step(const SaddleProblem& p, Algorithm algo, const StepSchedule& sched, const SolverState& st) {
  switch (algo) {
    case Algorithm::kArrowHurwicz: return arrow_hurwicz_step(p, st, sched.tau());
    case Algorithm::kPdhg: return pdhg_step(p, st, sched.tau());
    case Algorithm::kGeneralPdhg: return general_pdhg_step(p, st, sched.tau(), sched.sigma());
  }
  throw ConfigError("unknown algorithm");
}

inline Trace run(const SaddleProblem& p, Algorithm algo, const StepSchedule& sched, const Vector& x0, const Vector& y0,
                 std::size_t iterations, const RunOptions& opts = {}) {
  if (algo != Algorithm::kGeneralPdhg && !sched.is_single())
    throw ConfigError(std::string(to_string(algo)) + " takes a single step size s; use general-pdhg for (tau, sigma)");
  if (!(algo == Algorithm::kArrowHurwicz && opts.demonstration)) validate_schedule(p, sched, false);
  if (!x0.is_finite() || !y0.is_finite()) throw ConfigError("initial point has non-finite entries");

  Trace trace;
  trace.meta = TraceMetadata{problem_hash(p), sched, algo, opts.seed};
  trace.records.reserve(iterations + 1);

  SolverState st = SolverState::initial(x0, y0);
  detail::check_state(p, st);
  trace.records.push_back(TraceRecord{0, st.x, st.y, {}});
  for (const auto& hook : opts.hooks) hook(p, nullptr, st, trace.records.back());

  for (std::size_t it = 0; it < iterations; ++it) {
    SolverState next = step(p, algo, sched, st);
    const double magnitude = std::sqrt(norm_sq(next.x) + norm_sq(next.y));
    if (!next.x.is_finite() || !next.y.is_finite() || !(magnitude <= opts.divergence_threshold)) {
      std::ostringstream msg;
      msg << "divergence detected at iteration " << next.k << " (||(x,y)|| = " << magnitude
          << "); last finite record k=" << st.k;
      throw DivergenceError(msg.str(), st.k);
    }
    trace.records.push_back(TraceRecord{next.k, next.x, next.y, {}});
    for (const auto& hook : opts.hooks) hook(p, &st, next, trace.records.back());
    bool stop = false;
    if (opts.early_stop_ne) {
      const Vector dx = next.x - st.x;
      const Vector dy = next.y - st.y;
      const double ne = norm_sq(dx) / (2.0 * sched.tau()) + norm_sq(dy) / (2.0 * sched.sigma()) -
                        dot(matvec(p.F, dx), dy);
      stop = ne < *opts.early_stop_ne;
    }
    st = std::move(next);
    if (stop) break;
  }
  return trace;
}

}  // namespace saddlekit
