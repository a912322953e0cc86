#pragma once

#include <stdexcept>
#include <string>

namespace dgvi {

// Bad input: wrong dimensions, out-of-range parameters, malformed files.
// The CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine failed on inputs that passed validation
// (non-PD matrix, non-convergence, weight degeneracy). Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dgvi
