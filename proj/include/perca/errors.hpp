#pragma once

#include <stdexcept>
#include <string>

namespace perca {

/// Malformed or non-canonical group element encoding, or bad group parameters.
struct encoding_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input that violates an operation's preconditions (bad field, bad radius, ...).
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A configured budget (memory, enumeration, step count) was exceeded.
/// The message names the budget that ran out.
struct resource_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An internal invariant that must hold by construction was violated.
struct assertion_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace perca
