#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace saddlekit {

// Base of every error thrown by the library. The category drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Category { kConfig, kNumerical };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

// Invalid input shapes, unsupported descriptors, malformed configs.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::kConfig, what) {}
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Failures discovered while computing: singular systems, divergence, non-convergence.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(Category::kNumerical, what) {}
};

class FactorizationError : public NumericalError {
 public:
  FactorizationError(const std::string& what, std::size_t pivot)
      : NumericalError(what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : NumericalError(what), last_estimate_(last_estimate) {}
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  double last_estimate_;
};

// A step schedule outside the admissible region.
class StepBoundError : public ConfigError {
 public:
  StepBoundError(const std::string& what, double value) : ConfigError(what), value_(value) {}
  // s*||F|| or sqrt(tau*sigma)*||F||
  double value() const noexcept { return value_; }

 private:
  double value_;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::size_t last_finite_index)
      : NumericalError(what), last_finite_index_(last_finite_index) {}
  std::size_t last_finite_index() const noexcept { return last_finite_index_; }

 private:
  std::size_t last_finite_index_;
};

}  // namespace saddlekit
