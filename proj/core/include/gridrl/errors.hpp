#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridrl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network graph is not a single connected tree, or the slack bus is misplaced.
class TopologyError : public Error {
 public:
  using Error::Error;
};

// An electrical parameter is out of its physical range (e.g. zero impedance).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// An input file does not follow its documented schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown (singular Jacobian, NaN loss). Carries the iteration
// index at which it happened.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t iteration)
      : Error(what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace gridrl
