#pragma once

#include <stdexcept>
#include <string>

namespace dmmeeg {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  usage,      // bad arguments or configuration
  data,       // malformed or inconsistent input data
  numerical,  // non-finite values, failed factorizations
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& prefix, const std::string& detail)
      : std::runtime_error(prefix + detail), kind_(kind), detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the error-class prefix, for re-wrapping with more context.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorKind::data, "format error: ", what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::data, "shape error: ", what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, "", what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, "numerical error: ", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::usage, "config error: ", what) {}
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace dmmeeg
