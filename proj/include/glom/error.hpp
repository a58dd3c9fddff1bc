#ifndef GLOM_ERROR_HPP
#define GLOM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace glom {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer shape disagreements; message names the offending axes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or argument value (e.g. dropout p >= 1).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Problems with the content of a dataset (empty class, bad labels, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf or other numeric breakdown; message names the tensor involved.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Tape misuse (non-scalar backward seed, dangling node reference).
class GraphError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (bad magic, wrong column count, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// File claims a format version newer than this build supports.
class VersionError : public Error {
 public:
  using Error::Error;
};

// Truncation or checksum mismatch.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Solver failed to reach its tolerance within its iteration budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Per-row bandwidth search failure in the embedding module.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

// FoldPlan does not match the data it is applied to.
class PlanError : public Error {
 public:
  using Error::Error;
};

// Checkpoint/model pair that cannot be combined.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures on output paths.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace glom

#endif  // GLOM_ERROR_HPP
