#pragma once

#include <stdexcept>
#include <string>

namespace mscl {

// Malformed or inconsistent input data (manifests, blobs, predictions, ids).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or gradient left the finite range during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, truncated, or incompatible checkpoint container.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace mscl
