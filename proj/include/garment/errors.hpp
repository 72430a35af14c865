#pragma once

#include <stdexcept>
#include <string>

namespace garment {

// Bad or inconsistent input data (files, shapes, labels). CLI exit code 2.
struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure during computation (divergence, non-finite values,
// degenerate geometry where the math requires otherwise). CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace garment
