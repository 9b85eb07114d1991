#pragma once

#include <stdexcept>
#include <string>

namespace xr {

// Root of the error hierarchy. Every failure raised by this library is a
// subclass of Error, so callers can catch xr::Error at process boundaries.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Config / input validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};
class InputError : public Error {
 public:
  using Error::Error;
};

// Agent backends.
class BackendError : public Error {
 public:
  using Error::Error;
};
class EmptyResponse : public BackendError {
 public:
  using BackendError::BackendError;
};
class ParseError : public Error {
 public:
  using Error::Error;
};
class SchemaError : public Error {
 public:
  using Error::Error;
};
class UnparsableVerdict : public Error {
 public:
  using Error::Error;
};
class MockScriptError : public Error {
 public:
  using Error::Error;
};

// Vector / ranking math.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class LengthMismatch : public Error {
 public:
  using Error::Error;
};
class StateError : public Error {
 public:
  using Error::Error;
};

// Persistence.
class IoError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};

// Manifests.
class ReferentialError : public Error {
 public:
  using Error::Error;
};
class MissingFile : public Error {
 public:
  using Error::Error;
};
class SchemaDrift : public Error {
 public:
  using Error::Error;
};

// Metrics / statistics.
class EmptyRanking : public Error {
 public:
  using Error::Error;
};
class EmptySubsetRanking : public Error {
 public:
  using Error::Error;
};
class DegenerateInput : public Error {
 public:
  using Error::Error;
};
class TooFewRuns : public Error {
 public:
  using Error::Error;
};
class UnpairedRuns : public Error {
 public:
  using Error::Error;
};

}  // namespace xr
