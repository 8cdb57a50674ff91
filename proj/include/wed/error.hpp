#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wed {

/// Malformed arguments: dimension mismatches, out-of-range parameters.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point or field value left the domain where an operation is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative method failed. `trace` holds the iterate history that led
/// to the failure (objective values, residual norms or damping factors).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::vector<double> trace = {})
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

class DegenerateCurve : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested closed form is not registered for the given energy kind.
class NotAvailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wed
