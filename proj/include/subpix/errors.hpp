#pragma once

#include <stdexcept>

namespace subpix {

// Base class for all library failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : Error { using Error::Error; };
struct ZeroVector : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct InsufficientTrials : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct AsymmetryError : Error { using Error::Error; };

}  // namespace subpix
