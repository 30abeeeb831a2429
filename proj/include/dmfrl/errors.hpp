#pragma once

#include <stdexcept>
#include <string>

namespace dmfrl {

/// Shape or dimension disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid argument value (non-positive learning rate, empty batch, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation called in the wrong object state (backward before forward, ...).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid experiment or environment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dmfrl
