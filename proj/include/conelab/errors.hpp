#pragma once

#include <stdexcept>
#include <string>

namespace conelab {

// Rejected input: malformed data, violated preconditions, failed validation.
// The CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to deliver its contract (CG stagnation,
// ellipticity violated at a quadrature point, ...). Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system problems. Exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace conelab
