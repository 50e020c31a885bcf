#pragma once

#include <stdexcept>
#include <string>

namespace bwsl {

// Exit-code families surfaced by the command line tool.
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

// Raised by autodiff primitives whose operands do not conform.
class ShapeError : public NumericError {
 public:
  explicit ShapeError(const std::string& what) : NumericError(what) {}
};

}  // namespace bwsl
