#pragma once

#include <stdexcept>
#include <string>

namespace compc {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input data is geometrically degenerate (e.g. zero extent).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable file.
class IoError : public Error {
 public:
  using Error::Error;
};

// Guidance provider could not be reached; retrying may succeed.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Guidance provider answered, but the answer violates the protocol contract.
class GuidanceContractError : public Error {
 public:
  using Error::Error;
};

// Point cloud extraction failed (training divergence, empty level set, ...).
class ExtractionError : public Error {
 public:
  using Error::Error;
};

// A synthesis camera does not see the object.
class PoseError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace compc
