#pragma once

#include <stdexcept>
#include <string>

namespace gyrosl {

// Error categories map onto CLI exit codes (config=2, runtime=3, io=4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gyrosl
