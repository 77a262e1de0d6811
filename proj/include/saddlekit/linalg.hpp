#pragma once

// Small dense linear algebra: vectors, row-major matrices, Cholesky and LU
// solves, a Jacobi symmetric eigensolver and power iteration for ||F||.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "saddlekit/error.hpp"

namespace saddlekit {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double value = 0.0) : data_(n, value) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  static Vector constant(std::size_t n, double value) { return Vector(n, value); }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool is_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Vector& operator+=(const Vector& other) {
    check_same_size(other, "+=");
    for (std::size_t i = 0; i < size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  Vector& operator-=(const Vector& other) {
    check_same_size(other, "-=");
    for (std::size_t i = 0; i < size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }
  Vector& operator*=(double alpha) {
    for (double& v : data_) v *= alpha;
    return *this;
  }

  friend bool operator==(const Vector&, const Vector&) = default;

  void check_same_size(const Vector& other, const char* op) const {
    if (other.size() != size()) {
      std::ostringstream msg;
      msg << "vector size mismatch in " << op << ": " << size() << " vs " << other.size();
      throw DimensionError(msg.str());
    }
  }

 private:
  std::vector<double> data_;
};

inline Vector operator+(Vector a, const Vector& b) { return a += b; }
inline Vector operator-(Vector a, const Vector& b) { return a -= b; }
inline Vector operator*(double alpha, Vector v) { return v *= alpha; }
inline Vector operator*(Vector v, double alpha) { return v *= alpha; }
inline Vector operator-(Vector v) { return v *= -1.0; }

inline double dot(const Vector& a, const Vector& b) {
  a.check_same_size(b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm_sq(const Vector& v) { return dot(v, v); }
inline double norm(const Vector& v) { return std::sqrt(norm_sq(v)); }

inline double norm_inf(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Concatenation (x; y).
inline Vector stack(const Vector& a, const Vector& b) {
  std::vector<double> out(a.values());
  out.insert(out.end(), b.begin(), b.end());
  return Vector(std::move(out));
}

inline std::pair<Vector, Vector> split(const Vector& z, std::size_t head) {
  std::vector<double> a(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(head));
  std::vector<double> b(z.begin() + static_cast<std::ptrdiff_t>(head), z.end());
  return {Vector(std::move(a)), Vector(std::move(b))};
}

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_) {
      std::ostringstream msg;
      msg << "matrix entries length " << data_.size() << " does not match shape " << rows_ << "x"
          << cols_;
      throw DimensionError(msg.str());
    }
  }

  // Nested row lists; all rows must have equal length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) throw DimensionError("ragged matrix literal");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    std::vector<double> flat;
    flat.reserve(r * c);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != c) {
        std::ostringstream msg;
        msg << "ragged matrix: row " << i << " has " << rows[i].size() << " entries, expected "
            << c;
        throw DimensionError(msg.str());
      }
      flat.insert(flat.end(), rows[i].begin(), rows[i].end());
    }
    return Matrix(r, c, std::move(flat));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(const Vector& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }
  const std::vector<double>& entries() const noexcept { return data_; }

  std::vector<std::vector<double>> to_rows() const {
    std::vector<std::vector<double>> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i].assign(row(i).begin(), row(i).end());
    return out;
  }

  bool is_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  std::string shape() const {
    std::ostringstream s;
    s << rows_ << "x" << cols_;
    return s.str();
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) {
    std::ostringstream msg;
    msg << "matvec: matrix " << m.shape() << " cannot multiply vector of length " << v.size();
    throw DimensionError(msg.str());
  }
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    const auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) acc += r[j] * v[j];
    out[i] = acc;
  }
  return out;
}

// M^T v without materializing the transpose.
inline Vector matvec_transposed(const Matrix& m, const Vector& v) {
  if (m.rows() != v.size()) {
    std::ostringstream msg;
    msg << "matvec_transposed: matrix " << m.shape() << " (transposed) cannot multiply vector of length "
        << v.size();
    throw DimensionError(msg.str());
  }
  Vector out(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += r[j] * v[i];
  }
  return out;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shapes " + a.shape() + " and " + b.shape() + " are incompatible");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

// A^T A, symmetric by construction.
inline Matrix gram(const Matrix& a) {
  Matrix g(a.cols(), a.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = i; j < a.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) acc += a(r, i) * a(r, j);
      g(i, j) = acc;
      g(j, i) = acc;
    }
  return g;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("matrix sum: shapes " + a.shape() + " and " + b.shape() + " differ");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += b(i, j);
  return out;
}

inline Matrix operator*(double alpha, Matrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) *= alpha;
  return m;
}

inline double max_asymmetry(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
  return worst;
}

constexpr double kSymmetryTolerance = 1e-12;

// Lower-triangular Cholesky factor, reusable for repeated right-hand sides.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& m, double symmetry_tol = kSymmetryTolerance) : n_(m.rows()) {
    if (!m.is_square()) throw DimensionError("cholesky: matrix " + m.shape() + " is not square");
    if (const double asym = max_asymmetry(m); asym > symmetry_tol) {
      std::ostringstream msg;
      msg << "cholesky: matrix is not symmetric (max |M_ij - M_ji| = " << asym << ")";
      throw NumericalError(msg.str());
    }
    lower_ = Matrix(n_, n_);
    for (std::size_t j = 0; j < n_; ++j) {
      double diag = m(j, j);
      for (std::size_t k = 0; k < j; ++k) diag -= lower_(j, k) * lower_(j, k);
      if (!(diag > 0.0)) {
        std::ostringstream msg;
        msg << "cholesky: non-positive pivot " << diag << " at index " << j;
        throw FactorizationError(msg.str(), j);
      }
      const double ljj = std::sqrt(diag);
      lower_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n_; ++i) {
        double acc = m(i, j);
        for (std::size_t k = 0; k < j; ++k) acc -= lower_(i, k) * lower_(j, k);
        lower_(i, j) = acc / ljj;
      }
    }
  }

  std::size_t size() const noexcept { return n_; }
  const Matrix& lower() const noexcept { return lower_; }

  Vector solve(const Vector& b) const {
    if (b.size() != n_) {
      std::ostringstream msg;
      msg << "cholesky solve: factor is " << n_ << "x" << n_ << " but rhs has length " << b.size();
      throw DimensionError(msg.str());
    }
    Vector z(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = b[i];
      for (std::size_t k = 0; k < i; ++k) acc -= lower_(i, k) * z[k];
      z[i] = acc / lower_(i, i);
    }
    Vector x(n_);
    for (std::size_t ii = n_; ii-- > 0;) {
      double acc = z[ii];
      for (std::size_t k = ii + 1; k < n_; ++k) acc -= lower_(k, ii) * x[k];
      x[ii] = acc / lower_(ii, ii);
    }
    return x;
  }

 private:
  std::size_t n_;
  Matrix lower_;
};

inline Vector solve_spd(const Matrix& m, const Vector& b) { return Cholesky(m).solve(b); }

// Gaussian elimination with partial pivoting for general square systems.
inline Vector solve_general(Matrix m, Vector b, double singular_tol = 1e-13) {
  if (!m.is_square() || m.rows() != b.size()) {
    std::ostringstream msg;
    msg << "solve_general: matrix " << m.shape() << " with rhs of length " << b.size();
    throw DimensionError(msg.str());
  }
  const std::size_t n = m.rows();
  double scale = 0.0;
  for (double v : m.entries()) scale = std::max(scale, std::abs(v));
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
    if (std::abs(m(piv, col)) <= singular_tol * std::max(scale, 1.0)) {
      std::ostringstream msg;
      msg << "solve_general: matrix is singular (pivot " << m(piv, col) << " at column " << col
          << ")";
      throw FactorizationError(msg.str(), col);
    }
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(col, j), m(piv, j));
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = m(r, col) / m(col, col);
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) m(r, j) -= factor * m(col, j);
      b[r] -= factor * b[col];
    }
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) acc -= m(ii, j) * x[j];
    x[ii] = acc / m(ii, ii);
  }
  return x;
}

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // column j is the eigenvector of values[j]
};

// Cyclic Jacobi rotations; intended for the small matrices this library handles.
inline SymmetricEigen symmetric_eigen(const Matrix& m, double symmetry_tol = 1e-10) {
  if (!m.is_square()) throw DimensionError("symmetric_eigen: matrix " + m.shape() + " is not square");
  if (max_asymmetry(m) > symmetry_tol) throw NumericalError("symmetric_eigen: matrix is not symmetric");
  const std::size_t n = m.rows();
  Matrix a = m;
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= 1e-30 * std::max(total, 1e-300)) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v(k, order[j]);
  }
  return out;
}

// Minimum-norm least-squares solution of A x ~ b through the eigendecomposition
// of A A^T; eigenvalues below rank_tol * largest are treated as zero.
inline Vector least_squares(const Matrix& a, const Vector& b, double rank_tol = 1e-12) {
  if (a.rows() != b.size()) {
    std::ostringstream msg;
    msg << "least_squares: matrix " << a.shape() << " with rhs of length " << b.size();
    throw DimensionError(msg.str());
  }
  const SymmetricEigen eig = symmetric_eigen(gram(a.transpose()));
  const double top = eig.values.empty() ? 0.0 : std::max(eig.values[eig.values.size() - 1], 0.0);
  Vector w(a.rows());
  for (std::size_t j = 0; j < eig.values.size(); ++j) {
    const double lam = eig.values[j];
    if (lam <= rank_tol * top || lam <= 0.0) continue;
    double coeff = 0.0;
    for (std::size_t k = 0; k < a.rows(); ++k) coeff += eig.vectors(k, j) * b[k];
    coeff /= lam;
    for (std::size_t k = 0; k < a.rows(); ++k) w[k] += coeff * eig.vectors(k, j);
  }
  return matvec_transposed(a, w);
}

struct PowerIterationOptions {
  double tol = 1e-10;
  int max_iterations = 10'000;
  std::uint64_t seed = 0x5eed;
};

// ||F|| = sqrt(lambda_max(F^T F)) by power iteration from a seeded start vector.
inline double spectral_norm(const Matrix& f, const PowerIterationOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw ConfigError("spectral_norm: tol must be positive");
  if (f.rows() == 0 || f.cols() == 0) return 0.0;
  if (std::all_of(f.entries().begin(), f.entries().end(), [](double v) { return v == 0.0; }))
    return 0.0;

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Vector v(f.cols());
  for (double& e : v) e = unif(rng);
  v *= 1.0 / norm(v);

  double lambda = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Vector w = matvec_transposed(f, matvec(f, v));
    const double next = dot(v, w);  // Rayleigh quotient, non-decreasing
    const double wn = norm(w);
    if (wn == 0.0) {
      // Start landed in the null space; nudge deterministically.
      for (double& e : v) e = unif(rng);
      v *= 1.0 / norm(v);
      continue;
    }
    v = std::move(w);
    v *= 1.0 / wn;
    if (it > 0 && std::abs(next - lambda) <= opts.tol * next) return std::sqrt(next);
    lambda = next;
  }
  throw ConvergenceError("spectral_norm: power iteration did not converge", std::sqrt(lambda));
}

inline double spectral_norm(const Matrix& f, double tol) {
  PowerIterationOptions opts;
  opts.tol = tol;
  return spectral_norm(f, opts);
}

}  // namespace saddlekit
