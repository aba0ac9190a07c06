#pragma once

#include <stdexcept>
#include <string>

namespace softsample {

// Error categories; the numeric values double as CLI exit codes and C API
// status codes.
enum class ErrorKind { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Bad arguments or configuration.
struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};

// Malformed or infeasible input data.
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};

// Numerical failure (divergence, non-finite values).
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};

}  // namespace softsample
