#pragma once

#include <stdexcept>

namespace flowvc {

/// Malformed or unsupported input data: audio files, label files, config
/// text, corpus manifests. The CLI maps it to exit code 3.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, truncated, or version-mismatched checkpoint (CLI exit code 4).
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowvc
