#pragma once

#include <stdexcept>
#include <string>

namespace pgp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, bad arguments, empty inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

// Factorization failure after the jitter ladder is exhausted.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double last_jitter)
      : Error(what), last_jitter_(last_jitter) {}
  explicit NumericalError(const std::string& what) : Error(what) {}

  double last_jitter() const { return last_jitter_; }

 private:
  double last_jitter_ = 0.0;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  long line() const { return line_; }

 private:
  long line_;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, long line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace pgp
