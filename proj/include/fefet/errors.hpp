#pragma once

#include <stdexcept>
#include <string>

namespace fefet {

// Invalid parameters, pre-condition violations, malformed inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration files that fail to parse or validate. The CLI maps this to its
// own exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures while loading or writing data files.
class DataError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, Truncated, CountMismatch, Format, Insufficient };

  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace fefet
