#pragma once

// Low- and high-resolution ODE systems for the saddle dynamics,
//
//   alpha Xdot - s F^T Ydot = -F^T Y - grad f(X)
//   beta  Ydot - s F   Xdot =  F X   - grad g*(Y)
//
// (low resolution: alpha = beta = 1, s = 0), together with the integrators used
// to relate them to the discrete algorithms.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "saddlekit/error.hpp"
#include "saddlekit/functions.hpp"
#include "saddlekit/linalg.hpp"
#include "saddlekit/problems.hpp"

namespace saddlekit {

struct ContinuousState {
  double t = 0.0;
  Vector X;
  Vector Y;
};

class OdeSystem {
 public:
  enum class Kind { kLowRes, kHighRes, kGeneralHighRes };

  static OdeSystem low_res(SaddleProblem p) { return OdeSystem(std::move(p), Kind::kLowRes, 0.0, 1.0, 1.0); }

  static OdeSystem high_res(SaddleProblem p, double s) {
    if (!(s > 0.0)) throw ConfigError("high-resolution system needs s > 0");
    return OdeSystem(std::move(p), Kind::kHighRes, s, s, s);
  }

  // s = sqrt(tau sigma), alpha = sqrt(sigma / tau), beta = sqrt(tau / sigma).
  static OdeSystem general_high_res(SaddleProblem p, double tau, double sigma) {
    if (!(tau > 0.0) || !(sigma > 0.0)) throw ConfigError("general high-resolution system needs tau, sigma > 0");
    return OdeSystem(std::move(p), Kind::kGeneralHighRes, std::sqrt(tau * sigma), tau, sigma);
  }

  Kind kind() const noexcept { return kind_; }
  const SaddleProblem& problem() const noexcept { return problem_; }
  double s() const noexcept { return s_; }
  double tau() const noexcept { return tau_; }
  double sigma() const noexcept { return sigma_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }

  // [alpha I, -s F^T; -s F, beta I]
  const Matrix& mass() const noexcept { return mass_; }
  // grad-field Jacobian J and offset c with  rhs(Z) = J Z + c.
  const Matrix& jacobian() const { return require_smooth(), jacobian_; }
  const Vector& offset() const { return require_smooth(), offset_; }

  std::size_t d1() const noexcept { return problem_.d1(); }
  std::size_t d2() const noexcept { return problem_.d2(); }

  // Right-hand side (-F^T Y - grad f(X); F X - grad g*(Y)).
  Vector rhs(const Vector& z) const { return matvec(jacobian(), z) + offset(); }

  const Cholesky& mass_factor() const {
    if (!mass_factor_) {
      std::ostringstream msg;
      msg << "mass matrix is singular: s*||F|| = " << s_ * problem_.norm_F / std::sqrt(alpha_ * beta_)
          << " must be < 1 for the high-resolution field";
      throw NumericalError(msg.str());
    }
    return *mass_factor_;
  }

 private:
  OdeSystem(SaddleProblem p, Kind kind, double s, double tau, double sigma)
      : problem_(std::move(p)), kind_(kind), s_(s), tau_(tau), sigma_(sigma) {
    if (kind_ != Kind::kLowRes) {
      alpha_ = std::sqrt(sigma_ / tau_);
      beta_ = std::sqrt(tau_ / sigma_);
    }
    const std::size_t n1 = d1();
    const std::size_t n2 = d2();
    mass_ = Matrix(n1 + n2, n1 + n2);
    for (std::size_t i = 0; i < n1; ++i) mass_(i, i) = alpha_;
    for (std::size_t i = 0; i < n2; ++i) mass_(n1 + i, n1 + i) = beta_;
    for (std::size_t i = 0; i < n2; ++i)
      for (std::size_t j = 0; j < n1; ++j) {
        mass_(n1 + i, j) = -s_ * problem_.F(i, j);
        mass_(j, n1 + i) = -s_ * problem_.F(i, j);
      }
    // Positive definite iff s ||F|| < sqrt(alpha beta) = 1.
    if (s_ * problem_.norm_F < 1.0) {
      try {
        mass_factor_.emplace(mass_);
      } catch (const NumericalError&) {
      }
    }
    if (problem_.f.is_differentiable() && problem_.gstar.is_differentiable()) {
      const AffineGradient gf = affine_gradient(problem_.f, n1);
      const AffineGradient gg = affine_gradient(problem_.gstar, n2);
      jacobian_ = Matrix(n1 + n2, n1 + n2);
      offset_ = Vector(n1 + n2);
      for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n1; ++j) jacobian_(i, j) = -gf.H(i, j);
        offset_[i] = -gf.g[i];
      }
      for (std::size_t i = 0; i < n2; ++i) {
        for (std::size_t j = 0; j < n2; ++j) jacobian_(n1 + i, n1 + j) = -gg.H(i, j);
        offset_[n1 + i] = -gg.g[i];
      }
      for (std::size_t i = 0; i < n2; ++i)
        for (std::size_t j = 0; j < n1; ++j) {
          jacobian_(n1 + i, j) = problem_.F(i, j);
          jacobian_(j, n1 + i) = -problem_.F(i, j);
        }
      smooth_ = true;
    }
  }

  void require_smooth() const {
    if (!smooth_) {
      throw ConfigError("ODE systems need differentiable f and g* (got f=" + problem_.f.kind_name() +
                        ", g*=" + problem_.gstar.kind_name() + ")");
    }
  }

  SaddleProblem problem_;
  Kind kind_;
  double s_;
  double tau_;
  double sigma_;
  double alpha_ = 1.0;
  double beta_ = 1.0;
  Matrix mass_;
  std::optional<Cholesky> mass_factor_;
  bool smooth_ = false;
  Matrix jacobian_;
  Vector offset_;
};

inline Vector stack_state(const ContinuousState& st) { return stack(st.X, st.Y); }

inline void check_state(const OdeSystem& sys, const ContinuousState& st) {
  if (st.X.size() != sys.d1() || st.Y.size() != sys.d2()) {
    std::ostringstream msg;
    msg << "continuous state dimensions (" << st.X.size() << ", " << st.Y.size() << ") do not match system ("
        << sys.d1() << ", " << sys.d2() << ")";
    throw DimensionError(msg.str());
  }
}

// (Xdot, Ydot) solving  M (Xdot; Ydot) = rhs(X, Y).
inline std::pair<Vector, Vector> field(const OdeSystem& sys, const ContinuousState& st) {
  check_state(sys, st);
  const Vector r = sys.rhs(stack_state(st));
  if (sys.kind() == OdeSystem::Kind::kLowRes) return split(r, sys.d1());
  return split(sys.mass_factor().solve(r), sys.d1());
}

// Forward step in X, then Y updated with the new X:
//   X+ = X + h (-F^T Y - grad f(X)),  Y+ = Y + h (F X+ - grad g*(Y)).
inline ContinuousState symplectic_euler_step(const OdeSystem& sys, const ContinuousState& st, double h) {
  if (sys.kind() != OdeSystem::Kind::kLowRes) throw ConfigError("symplectic Euler applies to the low-resolution system");
  check_state(sys, st);
  const SaddleProblem& p = sys.problem();
  ContinuousState out;
  out.t = st.t + h;
  out.X = st.X + h * (-matvec_transposed(p.F, st.Y) - gradient(p.f, st.X));
  out.Y = st.Y + h * (matvec(p.F, out.X) - gradient(p.gstar, st.Y));
  return out;
}

// One implicit Euler step  M (Z+ - Z) / h = rhs(Z+), i.e. (M/h - J) Z+ = (M/h) Z + c.
inline ContinuousState implicit_euler_step(const OdeSystem& sys, const ContinuousState& st, double h) {
  if (!(h > 0.0)) throw ConfigError("implicit Euler step needs h > 0");
  check_state(sys, st);
  const Matrix& m = sys.mass();
  const Matrix& j = sys.jacobian();
  const std::size_t n = m.rows();
  Matrix lhs(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) lhs(r, c) = m(r, c) / h - j(r, c);
  const Vector z = stack_state(st);
  Vector rhs = matvec(m, z);
  rhs *= 1.0 / h;
  rhs += sys.offset();
  Vector next;
  try {
    next = solve_general(std::move(lhs), std::move(rhs));
  } catch (const FactorizationError& e) {
    throw NumericalError(std::string("implicit Euler system is singular: ") + e.what());
  }
  auto [x, y] = split(next, sys.d1());
  return ContinuousState{st.t + h, std::move(x), std::move(y)};
}

// Classical fourth-order Runge-Kutta; returns steps + 1 states including the start.
inline std::vector<ContinuousState> rk4_trajectory(const OdeSystem& sys, const ContinuousState& st0, double dt,
                                                   std::size_t steps) {
  check_state(sys, st0);
  const std::size_t n1 = sys.d1();
  auto deriv = [&](const Vector& z) {
    const Vector r = sys.rhs(z);
    if (sys.kind() == OdeSystem::Kind::kLowRes) return r;
    return sys.mass_factor().solve(r);
  };
  std::vector<ContinuousState> out;
  out.reserve(steps + 1);
  out.push_back(st0);
  Vector z = stack_state(st0);
  double t = st0.t;
  for (std::size_t i = 0; i < steps; ++i) {
    const Vector k1 = deriv(z);
    const Vector k2 = deriv(z + (0.5 * dt) * k1);
    const Vector k3 = deriv(z + (0.5 * dt) * k2);
    const Vector k4 = deriv(z + dt * k3);
    z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = st0.t + static_cast<double>(i + 1) * dt;
    auto [x, y] = split(z, n1);
    out.push_back(ContinuousState{t, std::move(x), std::move(y)});
  }
  return out;
}

// H(x, y) = (x^2 + y^2)/2 - x - y for the scalar counterexample flow.
inline double hamiltonian(const ContinuousState& st) {
  if (st.X.size() != 1 || st.Y.size() != 1) throw DimensionError("hamiltonian: expects a scalar (x, y) state");
  const double x = st.X[0];
  const double y = st.Y[0];
  return 0.5 * (x * x + y * y) - x - y;
}

// Trapezoidal time averages of X and Y over the sampled trajectory.
inline std::pair<Vector, Vector> time_average(const std::vector<ContinuousState>& traj) {
  if (traj.size() < 2) throw ConfigError("time_average: need at least two samples");
  Vector ix(traj.front().X.size());
  Vector iy(traj.front().Y.size());
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double w = 0.5 * (traj[i].t - traj[i - 1].t);
    ix += w * (traj[i].X + traj[i - 1].X);
    iy += w * (traj[i].Y + traj[i - 1].Y);
  }
  const double span = traj.back().t - traj.front().t;
  return {(1.0 / span) * ix, (1.0 / span) * iy};
}

}  // namespace saddlekit
