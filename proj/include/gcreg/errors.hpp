#pragma once

#include <stdexcept>
#include <string>

namespace gcreg {

/// Shape or length mismatch between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Operation called in a state or mode it does not support.
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Invalid run, dataset, or CLI configuration. `key` names the offending entry.
struct ConfigError : std::runtime_error {
  ConfigError(std::string key, const std::string &what)
      : std::runtime_error(what), key(std::move(key)) {}
  std::string key;
};

/// Malformed input file. `offset` is the byte position where parsing failed.
struct FormatError : std::runtime_error {
  FormatError(const std::string &what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset(offset) {}
  std::size_t offset;
};

/// Filesystem read/write failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace gcreg
