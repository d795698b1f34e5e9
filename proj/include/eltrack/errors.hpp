#pragma once

#include <stdexcept>
#include <string>

namespace eltrack {

/// Input violates a documented precondition (bad box, bad config value, ...).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tensor or feature-map dimensions do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Filesystem or serialization failure (missing file, corrupt checkpoint).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace eltrack
