#pragma once

#include <stdexcept>
#include <string>

namespace llmstep {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

/// A wire payload could not be decoded. `field()` names the offending field.
class DecodeError : public Error {
  public:
    DecodeError(std::string field, const std::string &detail)
        : Error("decode error at '" + field + "': " + detail), field_(std::move(field)) {}

    [[nodiscard]] const std::string &field() const noexcept { return field_; }

  private:
    std::string field_;
};

// Generator backend failures.
class BackendUnavailable : public Error {
  public:
    using Error::Error;
};

class BackendProtocolError : public Error {
  public:
    using Error::Error;
};

class DeadlineExceeded : public Error {
  public:
    using Error::Error;
};

// Proof environment failures. Neither of these is a tactic failure.
class EnvironmentIntegrityError : public Error {
  public:
    using Error::Error;
};

class EnvironmentUnavailable : public Error {
  public:
    using Error::Error;
};

/// A persisted report was written with an incompatible schema.
class SchemaMismatch : public Error {
  public:
    using Error::Error;
};

} // namespace llmstep
