#pragma once

#include <stdexcept>
#include <string>

namespace tflw {

// Error taxonomy mirrored by the CLI exit codes: usage errors exit 2,
// DataError exits 3, NumericError exits 4.

// Malformed or inconsistent input files and datasets (bad magic, truncated
// payload, ragged rows, dimension mismatches between files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: non-finite values where finite ones are required,
// covariances that are not positive definite, diverging training loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tflw
