#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace iht {

namespace detail {
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}
}  // namespace detail

/// Failure category; maps one-to-one onto CLI exit codes.
enum class ErrorKind { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// I/O, parsing and dataset-shape problems.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class SingularCovarianceError : public NumericError {
 public:
  SingularCovarianceError(double eigenvalue, long index)
      : NumericError("singular covariance: eigenvalue " + detail::sci(eigenvalue) +
                     " at index " + std::to_string(index)),
        eigenvalue_(eigenvalue),
        index_(index) {}
  double eigenvalue() const noexcept { return eigenvalue_; }
  long index() const noexcept { return index_; }

 private:
  double eigenvalue_;
  long index_;
};

/// Raised when the scaling constant of the rank statistic is not positive.
class DegenerateScalingError : public NumericError {
 public:
  explicit DegenerateScalingError(double value)
      : NumericError("degenerate scaling constant: " + detail::sci(value)), value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Quadrature did not reach the requested tolerance.
class AccuracyError : public NumericError {
 public:
  AccuracyError(double achieved, double requested)
      : NumericError("quadrature tolerance not met: achieved error " + detail::sci(achieved) +
                     ", requested " + detail::sci(requested)),
        achieved_(achieved) {}
  double achieved_error() const noexcept { return achieved_; }

 private:
  double achieved_;
};

}  // namespace iht
