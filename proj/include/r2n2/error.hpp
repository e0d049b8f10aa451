#pragma once

#include <stdexcept>
#include <string>

namespace r2n2 {

/// Base for everything the library throws. Data and model problems both land
/// here; the CLI maps them to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV parse failures, bad shapes,
/// segments too short for the requested model).
class DataError : public Error {
 public:
  using Error::Error;
};

/// CSV-specific parse failure carrying a 1-based row/column location. The
/// header is row 1.
class CsvError : public DataError {
 public:
  CsvError(const std::string& what, std::size_t row, std::size_t column)
      : DataError(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Normal equations could not be solved (rank-deficient design at lambda = 0).
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Optimization produced a non-finite loss or the generator diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace r2n2
