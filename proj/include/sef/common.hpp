#pragma once

#include <stdexcept>
#include <string>

namespace sef {

// Bad configuration (dimensions, rates, flags). CLI maps this to a usage error.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data (malformed corpus lines, out-of-range spans).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inclusive token-index span [start, end].
struct Span {
  int start = 0;
  int end = 0;
};

}  // namespace sef
