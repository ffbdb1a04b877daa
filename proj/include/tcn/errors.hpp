#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tcn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument violates an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A requested expansion or model exceeds a configured size limit.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::uint64_t requested)
      : Error(what), requested_(requested) {}
  std::uint64_t requested() const noexcept { return requested_; }

 private:
  std::uint64_t requested_;
};

/// A file cell or document could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Data does not have the expected columns.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that does not permit the call
/// (e.g. backward on a cache produced before the last parameter update).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration (unknown keys, bad values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace tcn
