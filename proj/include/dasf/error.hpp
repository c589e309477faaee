#pragma once

#include <stdexcept>
#include <string>

namespace dasf {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, malformed file, or a violated precondition on inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

// A computation that cannot produce a meaningful number (overflow,
// non-convergence, a degenerate regression, a vanishing denominator).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dasf
