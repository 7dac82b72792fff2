// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hvsgnn {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimensions do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A graph, dataset record or network specification violates its schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration (CLI flags, config files, presets).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace hvsgnn
