#pragma once

#include <stdexcept>
#include <string>

namespace qasched {

// Error taxonomy. The CLI maps ConfigError/LayoutError/UsageError/FormatError
// to exit code 2 and NumericalError to exit code 3.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid topology, spin count, mask index or experiment parameters.
struct ConfigError : Error {
  using Error::Error;
};

/// An instance does not embed into the requested feature layout.
struct LayoutError : Error {
  using Error::Error;
};

/// A caller violated an operation's precondition (shape, monotonicity, ...).
struct UsageError : Error {
  using Error::Error;
};

/// A numerical contract could not be met (Hermiticity, norm drift, divergence).
struct NumericalError : Error {
  using Error::Error;
};

/// Corrupt, truncated or version-mismatched file.
struct FormatError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace qasched
