#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gplab {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Raised when a NaN or Inf shows up in a computed value.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t node)
      : Error(what), node_(node) {}
  // Index of the first offending tape node (or element index for plain tensors).
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gplab
