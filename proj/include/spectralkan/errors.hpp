#pragma once

#include <stdexcept>
#include <string>

namespace spectralkan {

/// Caller violated a documented precondition (shape, length, range of an
/// integer argument, mismatched cache).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numeric input is outside the domain an operation can handle (NaN, inf).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A metric was requested on an empty confusion matrix.
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File I/O and file-format failures. `kind` lets callers tell the
/// failure modes apart without parsing messages.
class IoError : public std::runtime_error {
 public:
  enum class Kind { Open, MalformedHeader, Truncated, DimensionOverflow, InvalidValue, Write };

  IoError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace spectralkan
