#pragma once

#include <stdexcept>
#include <string>

namespace doc {

// Malformed or missing input (files, configuration, dimension mismatches).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A window with no usable pixels (nothing valid, everything masked).
class DegenerateWindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite energies/gradients or a failed numerical check.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace doc
