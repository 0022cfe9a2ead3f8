#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctxmotion {

// Error families. The CLI maps these onto exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class VocabularyError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SplitError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SpecError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class VersionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Schema violation in a line-delimited file. `line()` is 1-based; 0 when the
/// problem is not tied to a single record.
class SchemaError : public ValidationError {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : ValidationError(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line),
        detail_(what) {}
  std::size_t line() const { return line_; }
  /// The message without the line prefix.
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxmotion
