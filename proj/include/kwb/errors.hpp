#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace kwb {

/// Base of every error raised by the workbench.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset` is the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(std::string what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// ln/sqrt of a nonpositive value, division by zero, non-finite result.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A derivative of higher total degree than the jet carries was requested.
class OrderOverflow : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// A tangent vector outside the conic domain of a Finsler metric.
class ConicDomainError : public Error {
 public:
  using Error::Error;
};

/// A formula was asked to evaluate outside the hypotheses it is valid under.
class PreconditionFailure : public Error {
 public:
  using Error::Error;
};

/// A checker was asked to run outside its (kappa, nu) regime.
class DispatchError : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

/// Scenario document violates the schema. `pointer` is a JSON pointer.
class SchemaError : public Error {
 public:
  SchemaError(std::string pointer, const std::string& what)
      : Error("schema error at " + pointer + ": " + what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace kwb
