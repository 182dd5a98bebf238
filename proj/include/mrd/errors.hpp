#pragma once

#include <stdexcept>
#include <string>

namespace mrd {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumerical = 3,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const noexcept { return ExitCode::kUsage; }
};

/// Bad argument values (out-of-range thresholds, unknown view names, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Shape disagreement between matrices or between data and model.
class DimensionError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

/// Malformed input files, schema violations, inconsistent datasets.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

class VersionError : public DataError {
 public:
  using DataError::DataError;
};

/// Cholesky failed even after the maximum diagonal jitter.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

/// Non-finite objective values and other optimizer breakdowns.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

}  // namespace mrd
