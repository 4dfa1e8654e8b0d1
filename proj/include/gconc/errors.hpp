#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace gconc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ParseErrorKind { Syntax, UnknownIdentifier, VariableOutOfRange };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::size_t offset, const std::string& what)
      : Error(what + " (at offset " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ParseErrorKind kind_;
  std::size_t offset_;
};

// Evaluation left the domain of a primitive (log of a non-positive number,
// division by zero, ...) or produced a non-finite value.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subexpression)
      : Error(what + " in '" + subexpression + "'"),
        subexpression_(std::move(subexpression)) {}

  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string subexpression_;
};

// An integrand returned NaN or infinity at a sampled or quadrature point.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// A nested estimator would exceed its configured evaluation budget.
class BudgetExceededError : public Error {
 public:
  using Error::Error;
};

// exp(lambda * f) left the floating-point range at a sample.
class OverflowError : public Error {
 public:
  using Error::Error;
};

}  // namespace gconc
