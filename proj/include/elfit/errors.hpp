#pragma once

#include <stdexcept>
#include <string>

namespace elfit {

/// A computation produced a non-finite value or a numerical method broke down.
/// The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The constraint Gram matrix is singular beyond the jitter policy.
class GramDeficientError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace elfit
