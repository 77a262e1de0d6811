#pragma once

// Saddle problems  min_x max_y  f(x) + <F x, y> - g*(y)  and small-instance
// saddle-point oracles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "saddlekit/error.hpp"
#include "saddlekit/functions.hpp"
#include "saddlekit/linalg.hpp"

namespace saddlekit {

struct SaddleProblem {
  std::string name;
  FunctionDescriptor f;      // primal, dimension d1
  FunctionDescriptor gstar;  // dual, dimension d2
  Matrix F;                  // d2 x d1
  double norm_F = 0.0;
  double mu = 0.0;  // strong convexity modulus of f, 0 when unknown

  std::size_t d1() const noexcept { return F.cols(); }
  std::size_t d2() const noexcept { return F.rows(); }

  // Validates dimensions and derives ||F|| and mu.
  static SaddleProblem make(std::string name, FunctionDescriptor f, FunctionDescriptor gstar, Matrix coupling) {
    if (!coupling.is_finite()) throw ConfigError("coupling matrix F has non-finite entries");
    if (coupling.rows() == 0 || coupling.cols() == 0) throw DimensionError("coupling matrix F is empty");
    f.check_dimension(coupling.cols(), "f vs columns of F");
    gstar.check_dimension(coupling.rows(), "g* vs rows of F");
    SaddleProblem p;
    p.name = std::move(name);
    p.norm_F = spectral_norm(coupling);
    if (const auto* q = std::get_if<Quadratic>(&f.kind())) {
      p.mu = std::max(0.0, symmetric_eigen(q->P).values[0]);
      if (p.mu < 1e-12) p.mu = 0.0;
    }
    p.f = std::move(f);
    p.gstar = std::move(gstar);
    p.F = std::move(coupling);
    return p;
  }
};

// Phi(x, y) = f(x) + <F x, y> - g*(y)
inline double objective(const SaddleProblem& p, const Vector& x, const Vector& y) {
  return eval(p.f, x) + dot(matvec(p.F, x), y) - eval(p.gstar, y);
}

// Phi(x, y) = x - x y + y, unique saddle (1, 1).
inline SaddleProblem make_counterexample() {
  return SaddleProblem::make("counterexample", FunctionDescriptor::linear(Vector{1.0}),
                             FunctionDescriptor::linear(Vector{-1.0}), Matrix{{-1.0}});
}

// 1/2 ||A x - b||^2 + lambda ||F x||_1 with g* the l_inf ball of radius lambda.
inline SaddleProblem make_generalized_lasso(const Matrix& a, const Vector& b, double lambda, const Matrix& coupling) {
  if (!(lambda > 0.0)) throw ConfigError("generalized lasso: lambda must be > 0");
  if (a.cols() != coupling.cols()) {
    throw DimensionError("generalized lasso: A is " + a.shape() + " but F is " + coupling.shape() +
                         "; both need d1 columns");
  }
  return SaddleProblem::make("generalized-lasso", FunctionDescriptor::least_squares(a, b),
                             FunctionDescriptor::linf_ball(lambda), coupling);
}

// (n-1) x n first-difference operator.
inline Matrix difference_matrix(std::size_t n) {
  if (n < 2) throw ConfigError("difference_matrix: n must be >= 2");
  Matrix d(n - 1, n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return d;
}

// min ||x||_1 s.t. A x = b, written with F = I and g = ||.||_1.
inline SaddleProblem make_basis_pursuit(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size())
    throw DimensionError("basis pursuit: A is " + a.shape() + " but b has length " + std::to_string(b.size()));
  const Vector x_ls = least_squares(a, b);
  const double residual = norm(matvec(a, x_ls) - b);
  if (residual > 1e-8) {
    std::ostringstream msg;
    msg << "basis pursuit: b is not in the range of A (least-squares residual " << residual << ")";
    throw ConfigError(msg.str());
  }
  return SaddleProblem::make("basis-pursuit", FunctionDescriptor::affine(a, b), FunctionDescriptor::linf_ball(1.0),
                             Matrix::identity(a.cols()));
}

// Seeded quadratic-quadratic instance: f = 1/2 x^T P x + q^T x, g* = 1/2 y^T R y + r^T y,
// Gaussian coupling. Both curvatures are positive definite.
inline SaddleProblem make_random_quadratic(std::size_t d1, std::size_t d2, std::uint64_t seed) {
  if (d1 == 0 || d2 == 0) throw ConfigError("random quadratic: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_spd = [&](std::size_t n) {
    Matrix b(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) b(i, j) = gauss(rng) / std::sqrt(static_cast<double>(n));
    return gram(b) + 0.1 * Matrix::identity(n);
  };
  auto random_vec = [&](std::size_t n) {
    Vector v(n);
    for (double& e : v) e = gauss(rng);
    return v;
  };
  Matrix p = random_spd(d1);
  Vector q = random_vec(d1);
  Matrix r = random_spd(d2);
  Vector rv = random_vec(d2);
  Matrix coupling(d2, d1);
  for (std::size_t i = 0; i < d2; ++i)
    for (std::size_t j = 0; j < d1; ++j) coupling(i, j) = gauss(rng);
  return SaddleProblem::make("random-quadratic", FunctionDescriptor::quadratic(std::move(p), std::move(q)),
                             FunctionDescriptor::quadratic(std::move(r), std::move(rv)), std::move(coupling));
}

// Seeded generalized Lasso: Gaussian A (m x n, scaled by 1/sqrt(m)) and b, F = first
// differences when fused, identity otherwise.
inline SaddleProblem make_random_lasso(std::size_t m, std::size_t n, double lambda, bool fused, std::uint64_t seed) {
  if (m == 0 || n == 0) throw ConfigError("random lasso: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix a(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = gauss(rng) / std::sqrt(static_cast<double>(m));
  Vector b(m);
  for (double& e : b) e = gauss(rng);
  return make_generalized_lasso(a, b, lambda, fused ? difference_matrix(n) : Matrix::identity(n));
}

struct SaddleCertificate {
  Vector x_star;
  Vector y_star;
  double residual = 0.0;
};

struct OracleOptions {
  std::size_t probes = 100;
  double probe_radius = 5.0;
  std::uint64_t seed = 7;
  double accept_tol = 1e-7;
  std::size_t max_enumeration_dim = 12;
};

// Largest violation of the two saddle inequalities
//   f(x) - f(x*) + <F(x - x*), y*> >= 0,   g*(y) - g*(y*) - <F x*, y - y*> >= 0
// over seeded probes. Probes for indicator functions are projected onto their set.
inline double saddle_violation(const SaddleProblem& p, const Vector& x_star, const Vector& y_star,
                               const OracleOptions& opts = {}) {
  const double fx_star = eval(p.f, x_star);
  const double gy_star = eval(p.gstar, y_star);
  if (!std::isfinite(fx_star) || !std::isfinite(gy_star)) return std::numeric_limits<double>::infinity();
  const Vector fx_s = matvec(p.F, x_star);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-opts.probe_radius, opts.probe_radius);
  const bool project_x = p.f.is<IndicatorAffine>() || p.f.is<IndicatorLinfBall>();
  const bool project_y = p.gstar.is<IndicatorAffine>() || p.gstar.is<IndicatorLinfBall>();
  double worst = 0.0;
  for (std::size_t i = 0; i < opts.probes; ++i) {
    Vector x = x_star;
    for (double& e : x) e += unif(rng);
    Vector y = y_star;
    for (double& e : y) e += unif(rng);
    if (project_x) x = prox(p.f, 1.0, x);
    if (project_y) y = prox(p.gstar, 1.0, y);
    const double primal = eval(p.f, x) - fx_star + dot(matvec(p.F, x - x_star), y_star);
    const double dual = eval(p.gstar, y) - gy_star - dot(fx_s, y - y_star);
    worst = std::max({worst, -primal, -dual});
  }
  return worst;
}

namespace detail {

// Stationarity of differentiable f and g*:  [H_f, F^T; F, -H_g] (x; y) = (-g_f; g_g).
inline std::pair<Vector, Vector> smooth_saddle(const SaddleProblem& p) {
  const std::size_t n1 = p.d1();
  const std::size_t n2 = p.d2();
  const AffineGradient gf = affine_gradient(p.f, n1);
  const AffineGradient gg = affine_gradient(p.gstar, n2);
  Matrix kkt(n1 + n2, n1 + n2);
  Vector rhs(n1 + n2);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n1; ++j) kkt(i, j) = gf.H(i, j);
    for (std::size_t j = 0; j < n2; ++j) kkt(i, n1 + j) = p.F(j, i);
    rhs[i] = -gf.g[i];
  }
  for (std::size_t i = 0; i < n2; ++i) {
    for (std::size_t j = 0; j < n1; ++j) kkt(n1 + i, j) = p.F(i, j);
    for (std::size_t j = 0; j < n2; ++j) kkt(n1 + i, n1 + j) = -gg.H(i, j);
    rhs[n1 + i] = gg.g[i];
  }
  Vector z;
  try {
    z = solve_general(std::move(kkt), std::move(rhs));
  } catch (const FactorizationError&) {
    throw ConfigError("saddle_oracle: stationarity system is singular (saddle point not unique)");
  }
  return split(z, n1);
}

// Active-set enumeration for quadratic f and g* = indicator of the l_inf ball of radius lambda.
// Each row i of F is assigned a sign pattern s_i in {-1, 0, +1}; rows with s_i = 0 are
// constrained to (F x)_i = 0 with multiplier nu_i, |nu_i| <= lambda.
inline std::pair<Vector, Vector> lasso_saddle(const SaddleProblem& p, const OracleOptions& opts) {
  const std::size_t n1 = p.d1();
  const std::size_t n2 = p.d2();
  if (n1 > opts.max_enumeration_dim || n2 > opts.max_enumeration_dim) {
    std::ostringstream msg;
    msg << "saddle_oracle: active-set enumeration limited to dimensions <= " << opts.max_enumeration_dim << " (got d1="
        << n1 << ", d2=" << n2 << ")";
    throw ConfigError(msg.str());
  }
  const auto& quad = p.f.as<Quadratic>();
  const double lambda = p.gstar.as<IndicatorLinfBall>().radius;
  const double tol = 1e-9 * std::max(1.0, lambda);

  std::vector<int> sign(n2, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n2; ++i) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    std::vector<std::size_t> zero_rows;
    for (std::size_t i = 0; i < n2; ++i) {
      sign[i] = static_cast<int>(c % 3) - 1;
      c /= 3;
      if (sign[i] == 0) zero_rows.push_back(i);
    }
    const std::size_t nz = zero_rows.size();
    Matrix kkt(n1 + nz, n1 + nz);
    Vector rhs(n1 + nz);
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < n1; ++j) kkt(i, j) = quad.P(i, j);
      double acc = -quad.q[i];
      for (std::size_t r = 0; r < n2; ++r)
        if (sign[r] != 0) acc -= lambda * sign[r] * p.F(r, i);
      rhs[i] = acc;
    }
    for (std::size_t z = 0; z < nz; ++z)
      for (std::size_t j = 0; j < n1; ++j) {
        kkt(n1 + z, j) = p.F(zero_rows[z], j);
        kkt(j, n1 + z) = p.F(zero_rows[z], j);
      }
    Vector sol;
    try {
      sol = solve_general(std::move(kkt), std::move(rhs));
    } catch (const FactorizationError&) {
      continue;
    }
    auto [x, nu] = split(sol, n1);
    const Vector fx = matvec(p.F, x);
    bool consistent = true;
    for (std::size_t r = 0; r < n2 && consistent; ++r)
      if (sign[r] != 0 && sign[r] * fx[r] < -tol) consistent = false;
    for (std::size_t z = 0; z < nz && consistent; ++z)
      if (std::abs(nu[z]) > lambda + tol) consistent = false;
    if (!consistent) continue;
    Vector y(n2);
    for (std::size_t r = 0; r < n2; ++r) y[r] = lambda * sign[r];
    for (std::size_t z = 0; z < nz; ++z) y[zero_rows[z]] = std::clamp(nu[z], -lambda, lambda);
    return {std::move(x), std::move(y)};
  }
  throw NumericalError("saddle_oracle: no consistent active set found");
}

}  // namespace detail

// Saddle point of small instances: differentiable f and g* (stationarity solve) or
// quadratic f with an l_inf-ball g* (active-set enumeration). The returned certificate
// always passes the probe test.
inline SaddleCertificate saddle_oracle(const SaddleProblem& p, const OracleOptions& opts = {}) {
  std::pair<Vector, Vector> xy;
  if (p.f.is_differentiable() && p.gstar.is_differentiable()) {
    xy = detail::smooth_saddle(p);
  } else if (p.f.is<Quadratic>() && p.gstar.is<IndicatorLinfBall>()) {
    xy = detail::lasso_saddle(p, opts);
  } else {
    throw ConfigError("saddle_oracle: unsupported structure (f=" + p.f.kind_name() + ", g*=" + p.gstar.kind_name() + ")");
  }
  SaddleCertificate cert{std::move(xy.first), std::move(xy.second), 0.0};
  cert.residual = saddle_violation(p, cert.x_star, cert.y_star, opts);
  if (!(cert.residual <= opts.accept_tol)) {
    std::ostringstream msg;
    msg << "saddle_oracle: candidate failed the saddle inequality probes (violation " << cert.residual << ")";
    throw NumericalError(msg.str());
  }
  return cert;
}

}  // namespace saddlekit
