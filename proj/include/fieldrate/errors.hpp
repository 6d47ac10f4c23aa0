#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace fieldrate {

/// A configuration that is well-formed but cannot meet its distortion target
/// (too few sensors, no feasible K, ...).
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what,
                           std::optional<std::size_t> smallest_feasible = std::nullopt)
      : std::runtime_error(what), smallest_feasible_(smallest_feasible) {}

  /// Smallest N (or K) found feasible by a scan, when one was attempted.
  std::optional<std::size_t> smallest_feasible() const { return smallest_feasible_; }

 private:
  std::optional<std::size_t> smallest_feasible_;
};

/// A linear system that is singular after eigenvalue clamping.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The sought quantity is infinite, e.g. p_max when D >= 1.
class UnboundedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace fieldrate
