#pragma once

#include <stdexcept>
#include <string>

namespace roofkit {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File system or parse failures (missing files, malformed lines).
struct IoError : Error {
  using Error::Error;
};

/// Violated preconditions on data (empty cloud, size mismatch, bad config).
struct InvalidArgument : Error {
  using Error::Error;
};

/// Cloud-specific invariant violations (NaN coordinates, label length).
struct InvalidCloud : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

/// Raised when an optimization run trips the divergence guard.
struct Divergence : Error {
  using Error::Error;
};

}  // namespace roofkit
