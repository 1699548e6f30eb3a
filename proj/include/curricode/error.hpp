#pragma once

#include <stdexcept>
#include <string>

namespace curricode {

/// Base class for every error raised by the library. Module-specific errors
/// derive from it so callers can catch broadly or precisely.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace curricode
