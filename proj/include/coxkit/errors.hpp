#pragma once

#include <stdexcept>
#include <string>

namespace coxkit {

// Bad user input: malformed data, invalid parameters, schema violations.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model configuration that is valid but not supported by an algorithm.
class UnsupportedConfiguration : public InputError {
 public:
  using InputError::InputError;
};

// Factorization failures and other numerical breakdowns.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coxkit
