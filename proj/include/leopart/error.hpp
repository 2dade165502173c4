#pragma once

#include <stdexcept>
#include <string>

namespace leopart {

// Base for every error raised by the library. Subclasses carry the category
// so callers (and the CLI exit-code mapping) can distinguish them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file content: bad magic, unknown dtype, unparsable line.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Payload shorter than the header promises.
class LengthError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a declared invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

// Internal invariant broken (non-finite values where none may appear).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace leopart
