#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace fderiv {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset` is the byte offset just past the last
/// token that was accepted before the parser gave up.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string expected)
      : Error("syntax error at offset " + std::to_string(offset) + ": expected " + expected),
        offset_(offset),
        expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

class UnboundVariable : public Error {
 public:
  explicit UnboundVariable(std::string name)
      : Error("unbound variable '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// A function was evaluated outside its domain, or produced a non-finite value.
class DomainError : public Error {
 public:
  DomainError(std::string where, double argument)
      : Error("domain error in " + where + " at argument " + format(argument)),
        where_(std::move(where)),
        argument_(argument) {}

  const std::string& where() const noexcept { return where_; }
  double argument() const noexcept { return argument_; }

 private:
  static std::string format(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  std::string where_;
  double argument_;
};

/// Constructor parameters outside their admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An operation was called with inputs violating its documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace fderiv
