#pragma once

#include <stdexcept>
#include <string>

namespace gammacontam {

/// Malformed or out-of-contract input (bad CSV, invalid parameters, empty
/// detector list). Maps to CLI exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a valid result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The sigmoid hyperparameters cannot be solved for the given fit; the caller
/// is expected to refit with a fresh seed.
class CalibrationInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gammacontam
