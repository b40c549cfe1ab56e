#pragma once

#include <stdexcept>
#include <string>

namespace specseek {

// Invalid configuration: bad field values or incompatible component specs.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input length or shape violations detected at call time.
struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. stepping a finished episode.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file contents (checkpoints, config files).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failures; message carries path and OS cause.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace specseek
