#pragma once

#include <stdexcept>
#include <string>

namespace roomsense {

// Every library failure derives from Error. The CLI maps ConfigError to exit
// code 1, DivergenceError to 3 and everything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed header, unknown channel, or a checkpoint that does not match
/// the architecture it is loaded into.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A variable or channel whose statistics make the requested operation
/// undefined (zero variance, constant channel, all-missing channel).
class DegenerateError : public Error {
 public:
  DegenerateError(std::string variable, const std::string& what)
      : Error(variable + ": " + what), variable_(std::move(variable)) {}

  const std::string& variable() const noexcept { return variable_; }

 private:
  std::string variable_;
};

/// A data set too small to be partitioned as requested.
class SplitError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace roomsense
