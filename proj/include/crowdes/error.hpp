#pragma once

#include <stdexcept>
#include <string>

namespace crowdes {

// Malformed or out-of-contract input. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required file (checkpoint, raster, dataset) is absent. Exit code 3.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfBoundsError : public InputError {
 public:
  using InputError::InputError;
};

class NoPathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crowdes
