#pragma once

#include <stdexcept>
#include <string>

namespace rlabo {

/// Raised when a linear-algebra step fails beyond recovery (e.g. the kernel
/// matrix cannot be factorized even at maximum jitter).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: unknown names, mismatched checkpoint shapes,
/// missing inputs. Maps to exit status 2 at the command line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was called in the wrong lifecycle state (stepping a finished
/// episode, querying an unfitted model).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace rlabo
