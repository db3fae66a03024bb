#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vism {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range user input (files, coordinates, arguments).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration: unknown atom types, grids that cannot hold
/// the molecule, parameters outside their admissible ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside the domain of a formula (r = 0, R = 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced during a numerical update.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Raised when an energy is requested for a potential that no longer solves
/// the field equation for the given interface profile.
class StalePotentialError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> residuals)
      : Error(what), residual_history_(std::move(residuals)) {}

  const std::vector<double>& residual_history() const noexcept { return residual_history_; }

 private:
  std::vector<double> residual_history_;
};

}  // namespace vism
