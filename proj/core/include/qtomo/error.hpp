#pragma once

#include <stdexcept>
#include <string>

namespace qtomo {

// Bad input: malformed files, out-of-range parameters, states that violate
// their invariants. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation that cannot proceed (degenerate protocol, all-zero spectrum).
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qtomo
