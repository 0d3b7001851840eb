#pragma once

#include <stdexcept>
#include <string>

namespace rwsim {

// Base of every error the library throws. The CLI maps the subclasses onto
// exit codes (configuration = 2, numeric = 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& source, int line, const std::string& what)
      : ConfigError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class SizeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class NumericDomainError : public NumericError {
 public:
  explicit NumericDomainError(const std::string& op)
      : NumericError("numeric domain violation in " + op), op_(op) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

class SurfaceDomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateSystemError : public NumericError {
 public:
  using NumericError::NumericError;
};

class VignettedFieldError : public NumericError {
 public:
  using NumericError::NumericError;
};

class AimingError : public NumericError {
 public:
  AimingError(const std::string& what, double residual)
      : NumericError(what + " (residual " + std::to_string(residual) + " mm)"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace rwsim
