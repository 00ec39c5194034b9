#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace lrr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension or layout mismatch between tensors.
struct ShapeError : Error {
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

// Non-finite value where a finite one is required.
struct NumericError : Error {
  using Error::Error;
};

// API used out of its documented protocol (stale cache, step after done, ...).
struct ContractError : Error {
  using Error::Error;
};

// Iterative solver failed to converge within its budget.
struct ConvergenceError : Error {
  using Error::Error;
};

// Malformed or out-of-range configuration input.
struct ConfigError : Error {
  using Error::Error;
};

// File read/write failure.
struct IoError : Error {
  using Error::Error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace lrr
