#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trainopt {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A step or evaluation produced NaN/Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Bound constants cannot be formed because S_alpha * D_w^2 >= 1.
class InfeasibleConstants : public Error {
 public:
  using Error::Error;
};

// Power iteration ran out of iterations. Carries the last estimate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : Error(what), last_estimate_(last_estimate) {}
  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

// Malformed input file. `line` is 1-based; 0 means "whole file".
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& msg)
      : Error(path + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Reading or writing a result file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace trainopt
