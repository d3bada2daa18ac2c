#pragma once

#include <stdexcept>
#include <string>

namespace lpca {

enum class ErrorKind { Config, Data, Numerical, Contract };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Contract: return "contract";
  }
  return "unknown";
}

/// Base error for every failure raised by the library. The kind decides the
/// CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error(ErrorKind::Contract, what) {}
};

namespace detail {
inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

/// Throws the subclass matching `kind`.
[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  switch (kind) {
    case ErrorKind::Config: throw ConfigError(what);
    case ErrorKind::Data: throw DataError(what);
    case ErrorKind::Numerical: throw NumericalError(what);
    case ErrorKind::Contract: throw ContractError(what);
  }
  throw Error(kind, what);
}
}  // namespace detail

}  // namespace lpca
