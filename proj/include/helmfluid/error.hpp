#pragma once

#include <stdexcept>
#include <string>

namespace helmfluid {

/// Malformed file contents (bad magic, truncated payload, unparsable header).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Valid file that uses a layout this library does not read (Fortran order, big-endian).
class UnsupportedLayoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation requires a different boundary mode (e.g. spectral ops on a non-periodic grid).
class UnsupportedDomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical blow-up (NaN/Inf) in a time stepper or training loop.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace helmfluid
