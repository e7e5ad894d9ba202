#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pfm {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed case file or unreadable input.
struct ParseError : Error {
  using Error::Error;
};

/// Structurally invalid data (disconnected graph, bad bus types, ...).
struct ValidationError : Error {
  using Error::Error;
};

/// Iterative solve failed to converge (target likely infeasible).
struct ConvergenceError : Error {
  using Error::Error;
};

/// Singular or ill-conditioned linear-algebra subproblem.
struct NumericalError : Error {
  using Error::Error;
};

/// Increment matrix does not span the state space; carries the
/// offending null-space direction for diagnostics.
struct RankDeficiencyError : NumericalError {
  RankDeficiencyError(const std::string& msg, std::vector<double> dir)
      : NumericalError(msg), null_direction(std::move(dir)) {}
  std::vector<double> null_direction;
};

}  // namespace pfm
