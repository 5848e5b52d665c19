#pragma once

#include <stdexcept>
#include <string>

namespace mksgd {

// Shapes or base points do not match what an operation expects.
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A point fails its manifold constraint.
struct constraint_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Retraction input is degenerate (zero column, rank-deficient QR).
struct singular_step_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Closed-form map requested for a family that does not have one.
struct unsupported_map_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation called out of order (e.g. backward before forward).
struct state_error : std::logic_error {
  using std::logic_error::logic_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mksgd
