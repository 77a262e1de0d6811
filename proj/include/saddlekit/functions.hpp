#pragma once

// Prox-friendly convex functions: evaluation, Fenchel conjugation and
// closed-form proximal maps for the six supported descriptor kinds.

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "saddlekit/error.hpp"
#include "saddlekit/linalg.hpp"

namespace saddlekit {

// 1/2 x^T P x + q^T x + c, P symmetric positive semidefinite.
struct Quadratic {
  Matrix P;
  Vector q;
  double c = 0.0;
  friend bool operator==(const Quadratic&, const Quadratic&) = default;
};

// lambda * ||x||_1
struct ScaledL1 {
  double lambda = 0.0;
  friend bool operator==(const ScaledL1&, const ScaledL1&) = default;
};

// <c, x>
struct Linear {
  Vector c;
  friend bool operator==(const Linear&, const Linear&) = default;
};

// Indicator of {x : ||x||_inf <= radius}
struct IndicatorLinfBall {
  double radius = 0.0;
  friend bool operator==(const IndicatorLinfBall&, const IndicatorLinfBall&) = default;
};

// Indicator of {x : A x = b}
struct IndicatorAffine {
  Matrix A;
  Vector b;
  friend bool operator==(const IndicatorAffine&, const IndicatorAffine&) = default;
};

// Identically zero; dim == 0 means "any dimension".
struct Zero {
  std::size_t dim = 0;
  friend bool operator==(const Zero&, const Zero&) = default;
};

using FunctionKind = std::variant<Quadratic, ScaledL1, Linear, IndicatorLinfBall, IndicatorAffine, Zero>;

// Slack used when deciding indicator membership.
constexpr double kIndicatorSlack = 1e-9;

namespace detail {

// Cholesky factors of (step * P + I), keyed on step. Entries are immutable once inserted.
class QuadraticFactorCache {
 public:
  std::shared_ptr<const Cholesky> get(const Matrix& p, double step) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& [key, factor] : entries_)
      if (key == step) return factor;
    Matrix m = step * p + Matrix::identity(p.rows());
    auto factor = std::make_shared<const Cholesky>(m, 1e-10);
    if (entries_.size() >= 8) entries_.erase(entries_.begin());
    entries_.emplace_back(step, factor);
    return factor;
  }

 private:
  std::mutex mutex_;
  std::vector<std::pair<double, std::shared_ptr<const Cholesky>>> entries_;
};

// Pseudo-inverse data for projecting onto {Ax = b}.
struct AffineProjector {
  SymmetricEigen gram_eigen;  // of A A^T
  double cutoff = 0.0;

  explicit AffineProjector(const Matrix& a) : gram_eigen(symmetric_eigen(gram(a.transpose()))) {
    const std::size_t n = gram_eigen.values.size();
    const double top = n == 0 ? 0.0 : std::max(gram_eigen.values[n - 1], 0.0);
    cutoff = 1e-12 * top;
  }

  // Minimum-norm w with (A A^T) w = r restricted to range(A A^T).
  Vector solve_gram(const Vector& r) const {
    Vector w(r.size());
    for (std::size_t j = 0; j < gram_eigen.values.size(); ++j) {
      const double lam = gram_eigen.values[j];
      if (lam <= cutoff || lam <= 0.0) continue;
      double coeff = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) coeff += gram_eigen.vectors(k, j) * r[k];
      coeff /= lam;
      for (std::size_t k = 0; k < r.size(); ++k) w[k] += coeff * gram_eigen.vectors(k, j);
    }
    return w;
  }
};

}  // namespace detail

class FunctionDescriptor {
 public:
  FunctionDescriptor() : kind_(Zero{}) {}

  static FunctionDescriptor quadratic(Matrix p, Vector q, double c = 0.0) {
    if (!p.is_square() || p.rows() != q.size())
      throw DimensionError("quadratic: P is " + p.shape() + " but q has length " + std::to_string(q.size()));
    if (max_asymmetry(p) > 1e-10) throw ConfigError("quadratic: curvature matrix P is not symmetric");
    if (p.rows() > 0) {
      const SymmetricEigen eig = symmetric_eigen(p);
      const double scale = std::max(1.0, std::abs(eig.values[eig.values.size() - 1]));
      if (eig.values[0] < -1e-10 * scale) {
        std::ostringstream msg;
        msg << "quadratic: P is not positive semidefinite (min eigenvalue " << eig.values[0] << ")";
        throw ConfigError(msg.str());
      }
    }
    FunctionDescriptor d(Quadratic{std::move(p), std::move(q), c});
    d.quadratic_cache_ = std::make_shared<detail::QuadraticFactorCache>();
    return d;
  }

  // 1/2 ||A x - b||^2 expanded as P = A^T A, q = -A^T b, c = 1/2 ||b||^2.
  static FunctionDescriptor least_squares(const Matrix& a, const Vector& b) {
    if (a.rows() != b.size())
      throw DimensionError("least_squares: A is " + a.shape() + " but b has length " + std::to_string(b.size()));
    return quadratic(gram(a), -matvec_transposed(a, b), 0.5 * norm_sq(b));
  }

  static FunctionDescriptor scaled_l1(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("scaled_l1: lambda must be finite and >= 0");
    return FunctionDescriptor(ScaledL1{lambda});
  }

  static FunctionDescriptor linear(Vector c) { return FunctionDescriptor(Linear{std::move(c)}); }

  static FunctionDescriptor linf_ball(double radius) {
    if (!(radius >= 0.0) || !std::isfinite(radius)) throw ConfigError("linf_ball: radius must be finite and >= 0");
    return FunctionDescriptor(IndicatorLinfBall{radius});
  }

  static FunctionDescriptor affine(Matrix a, Vector b) {
    if (a.rows() != b.size())
      throw DimensionError("affine: A is " + a.shape() + " but b has length " + std::to_string(b.size()));
    FunctionDescriptor d(IndicatorAffine{a, std::move(b)});
    d.affine_projector_ = std::make_shared<const detail::AffineProjector>(a);
    return d;
  }

  static FunctionDescriptor zero(std::size_t dim = 0) { return FunctionDescriptor(Zero{dim}); }

  const FunctionKind& kind() const noexcept { return kind_; }

  template <typename T>
  bool is() const noexcept {
    return std::holds_alternative<T>(kind_);
  }
  template <typename T>
  const T& as() const {
    return std::get<T>(kind_);
  }

  std::string kind_name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Quadratic>) return "quadratic";
          else if constexpr (std::is_same_v<K, ScaledL1>) return "l1";
          else if constexpr (std::is_same_v<K, Linear>) return "linear";
          else if constexpr (std::is_same_v<K, IndicatorLinfBall>) return "linf-ball";
          else if constexpr (std::is_same_v<K, IndicatorAffine>) return "affine";
          else return "zero";
        },
        kind_);
  }

  // Fixed dimension, if the kind carries one.
  std::optional<std::size_t> dimension() const {
    return std::visit(
        [](const auto& k) -> std::optional<std::size_t> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Quadratic>) return k.P.rows();
          else if constexpr (std::is_same_v<K, Linear>) return k.c.size();
          else if constexpr (std::is_same_v<K, IndicatorAffine>) return k.A.cols();
          else if constexpr (std::is_same_v<K, Zero>) {
            if (k.dim == 0) return std::nullopt;
            return k.dim;
          } else return std::nullopt;
        },
        kind_);
  }

  bool is_differentiable() const { return is<Quadratic>() || is<Linear>() || is<Zero>(); }

  void check_dimension(std::size_t n, const char* context) const {
    if (auto dim = dimension(); dim && *dim != n) {
      std::ostringstream msg;
      msg << context << ": " << kind_name() << " descriptor has dimension " << *dim
          << " but the point has length " << n;
      throw DimensionError(msg.str());
    }
  }

  std::shared_ptr<detail::QuadraticFactorCache> quadratic_cache() const { return quadratic_cache_; }
  std::shared_ptr<const detail::AffineProjector> affine_projector() const { return affine_projector_; }

  friend bool operator==(const FunctionDescriptor& a, const FunctionDescriptor& b) { return a.kind_ == b.kind_; }

 private:
  explicit FunctionDescriptor(FunctionKind kind) : kind_(std::move(kind)) {}

  FunctionKind kind_;
  std::shared_ptr<detail::QuadraticFactorCache> quadratic_cache_;
  std::shared_ptr<const detail::AffineProjector> affine_projector_;
};

// Function value, +inf outside an indicator's set (beyond kIndicatorSlack).
inline double eval(const FunctionDescriptor& d, const Vector& v) {
  d.check_dimension(v.size(), "eval");
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Quadratic>) {
          return 0.5 * dot(v, matvec(k.P, v)) + dot(k.q, v) + k.c;
        } else if constexpr (std::is_same_v<K, ScaledL1>) {
          double s = 0.0;
          for (double x : v) s += std::abs(x);
          return k.lambda * s;
        } else if constexpr (std::is_same_v<K, Linear>) {
          return dot(k.c, v);
        } else if constexpr (std::is_same_v<K, IndicatorLinfBall>) {
          return norm_inf(v) <= k.radius + kIndicatorSlack ? 0.0 : inf;
        } else if constexpr (std::is_same_v<K, IndicatorAffine>) {
          return norm_inf(matvec(k.A, v) - k.b) <= kIndicatorSlack ? 0.0 : inf;
        } else {
          return 0.0;
        }
      },
      d.kind());
}

// For differentiable kinds the gradient is affine: grad d(x) = H x + g.
struct AffineGradient {
  Matrix H;
  Vector g;
};

inline AffineGradient affine_gradient(const FunctionDescriptor& d, std::size_t n) {
  d.check_dimension(n, "affine_gradient");
  if (const auto* q = std::get_if<Quadratic>(&d.kind())) return {q->P, q->q};
  if (const auto* l = std::get_if<Linear>(&d.kind())) return {Matrix(n, n), l->c};
  if (d.is<Zero>()) return {Matrix(n, n), Vector(n)};
  throw ConfigError("descriptor kind '" + d.kind_name() + "' is not differentiable");
}

inline Vector gradient(const FunctionDescriptor& d, const Vector& v) {
  d.check_dimension(v.size(), "gradient");
  if (const auto* q = std::get_if<Quadratic>(&d.kind())) return matvec(q->P, v) + q->q;
  if (const auto* l = std::get_if<Linear>(&d.kind())) return l->c;
  if (d.is<Zero>()) return Vector(v.size());
  throw ConfigError("descriptor kind '" + d.kind_name() + "' is not differentiable");
}

inline double soft_threshold(double v, double t) {
  if (std::abs(v) <= t) return 0.0;
  return v > 0.0 ? v - t : v + t;
}

// argmin_u { d(u) + ||u - point||^2 / (2 step) }
inline Vector prox(const FunctionDescriptor& d, double step, const Vector& point) {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("prox: step must be finite and > 0");
  d.check_dimension(point.size(), "prox");
  return std::visit(
      [&](const auto& k) -> Vector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Quadratic>) {
          auto factor = d.quadratic_cache()->get(k.P, step);
          return factor->solve(point - step * k.q);
        } else if constexpr (std::is_same_v<K, ScaledL1>) {
          Vector out(point.size());
          const double t = step * k.lambda;
          for (std::size_t i = 0; i < point.size(); ++i) out[i] = soft_threshold(point[i], t);
          return out;
        } else if constexpr (std::is_same_v<K, Linear>) {
          return point - step * k.c;
        } else if constexpr (std::is_same_v<K, IndicatorLinfBall>) {
          Vector out(point.size());
          for (std::size_t i = 0; i < point.size(); ++i)
            out[i] = std::clamp(point[i], -k.radius, k.radius);
          return out;
        } else if constexpr (std::is_same_v<K, IndicatorAffine>) {
          const Vector residual = matvec(k.A, point) - k.b;
          return point - matvec_transposed(k.A, d.affine_projector()->solve_gram(residual));
        } else {
          return point;
        }
      },
      d.kind());
}

struct ProxQuery {
  const FunctionDescriptor& descriptor;
  double step;
  const Vector& point;
};

inline Vector prox(const ProxQuery& q) { return prox(q.descriptor, q.step, q.point); }

// Legendre-Fenchel conjugate within the closed-under-conjugation subset.
inline FunctionDescriptor conjugate(const FunctionDescriptor& d) {
  if (const auto* l1 = std::get_if<ScaledL1>(&d.kind())) return FunctionDescriptor::linf_ball(l1->lambda);
  if (const auto* ball = std::get_if<IndicatorLinfBall>(&d.kind())) return FunctionDescriptor::scaled_l1(ball->radius);
  if (const auto* lin = std::get_if<Linear>(&d.kind())) {
    return FunctionDescriptor::affine(Matrix::identity(lin->c.size()), lin->c);
  }
  if (const auto* z = std::get_if<Zero>(&d.kind())) {
    if (z->dim == 0) throw ConfigError("conjugate: zero function needs an explicit dimension; specify the conjugate manually");
    return FunctionDescriptor::affine(Matrix::identity(z->dim), Vector(z->dim));
  }
  if (const auto* aff = std::get_if<IndicatorAffine>(&d.kind())) {
    // Only singleton sets {x0} conjugate to a linear function.
    if (!aff->A.is_square())
      throw ConfigError("conjugate: affine indicator with non-square A is unsupported; specify the conjugate manually");
    const SymmetricEigen eig = symmetric_eigen(gram(aff->A));
    const double top = std::max(eig.values[eig.values.size() - 1], 0.0);
    if (eig.values[0] <= 1e-12 * top || top == 0.0)
      throw ConfigError("conjugate: affine indicator with singular A is unsupported; specify the conjugate manually");
    const Vector x0 = least_squares(aff->A, aff->b);
    return FunctionDescriptor::linear(x0);
  }
  const auto& quad = d.as<Quadratic>();
  const std::size_t n = quad.P.rows();
  std::optional<Cholesky> factor;
  try {
    factor.emplace(quad.P, 1e-10);
  } catch (const NumericalError&) {
    throw ConfigError("conjugate: quadratic with singular curvature is unsupported; specify the conjugate manually");
  }
  Matrix inv(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector e(n);
    e[j] = 1.0;
    const Vector col = factor->solve(e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = avg;
      inv(j, i) = avg;
    }
  const Vector pinv_q = factor->solve(quad.q);
  return FunctionDescriptor::quadratic(std::move(inv), -pinv_q, 0.5 * dot(quad.q, pinv_q) - quad.c);
}

}  // namespace saddlekit
