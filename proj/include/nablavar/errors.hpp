#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace nablavar {

// Base for every error the library raises.  The CLI maps the two families
// below onto exit codes: InputError -> 2, MathError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input: grids, bounds, expressions, files.
class InputError : public Error {
 public:
  using Error::Error;
};

// A numerical evaluation failed (domain violation, non-finite objective).
class MathError : public Error {
 public:
  using Error::Error;
};

class InvalidTimeScale : public InputError {
 public:
  using InputError::InputError;
};

class PointNotInScale : public InputError {
 public:
  explicit PointNotInScale(double t)
      : InputError("point " + format_value(t) + " is not in the time scale"),
        point_(t) {}
  double point() const { return point_; }

  static std::string format_value(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", t);
    return buf;
  }

 private:
  double point_;
};

class OutsideKappa : public InputError {
 public:
  using InputError::InputError;
};

class ReversedBounds : public InputError {
 public:
  using InputError::InputError;
};

class GridMismatch : public InputError {
 public:
  using InputError::InputError;
};

class EmptyTail : public InputError {
 public:
  using InputError::InputError;
};

class EnumerationGuard : public InputError {
 public:
  using InputError::InputError;
};

class SyntaxError : public InputError {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : InputError(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownIdentifier : public SyntaxError {
 public:
  using SyntaxError::SyntaxError;
};

class ArityError : public SyntaxError {
 public:
  using SyntaxError::SyntaxError;
};

class DomainError : public MathError {
 public:
  DomainError(const std::string& what, std::string subtree)
      : MathError(what + " in '" + subtree + "'"), subtree_(std::move(subtree)) {}
  const std::string& subtree() const { return subtree_; }

 private:
  std::string subtree_;
};

}  // namespace nablavar
