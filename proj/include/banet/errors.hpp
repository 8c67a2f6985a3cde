#pragma once

#include <stdexcept>
#include <string>

namespace banet {

// Invalid shapes or hyperparameters handed to an op or layer.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API misuse: wrong argument counts, backward on a non-scalar, ...
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A file exists but its contents do not match the expected encoding.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file or directory could not be opened, created or written.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss or metric asked to reduce over zero valid pixels.
class EmptyMaskError : public std::domain_error {
 public:
  EmptyMaskError() : std::domain_error("no valid pixels under the mask") {}
  using std::domain_error::domain_error;
};

class UnsupportedVariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A loss or gradient became NaN or infinite during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace banet
