#pragma once

#include <stdexcept>
#include <string>

namespace psn {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input caught before any compute starts (shapes, ranges, config keys).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A requested sparsity or CCV cannot be met under the fan-in constraints.
class InfeasibleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Malformed file contents (IDX, CSV, PSNMASK, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradients during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace psn
