#pragma once

#include <stdexcept>
#include <string>

namespace sre {

/// Base class for every error raised by the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A record or configuration violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Generation failed (unreachable endpoint, malformed payload, exhausted script).
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace sre
