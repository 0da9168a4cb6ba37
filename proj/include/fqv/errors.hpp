#pragma once

#include <stdexcept>
#include <string>

namespace fqv {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument values (bad dimensions, horizons, seeds, scale ranges...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed partition or partition/path mismatch.
class PartitionError : public Error {
 public:
  using Error::Error;
};

// A derivative or operation was requested that the functional does not carry.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Config file / expression parsing problems. `where` is a field path such as
// "partitions.n_max" so callers can report the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& where, const std::string& msg)
      : Error(where.empty() ? msg : where + ": " + msg), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

}  // namespace fqv
