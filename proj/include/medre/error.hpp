// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace medre {

/// Base class for every failure raised by the library. The CLI maps each
/// subclass to a distinct exit code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent annotation data.
class ValidationError : public Error {
public:
  ValidationError(std::string rule, std::string id, const std::string &what)
      : Error(what), rule_(std::move(rule)), id_(std::move(id)) {}

  const std::string &rule() const { return rule_; }
  const std::string &id() const { return id_; }

private:
  std::string rule_;
  std::string id_;
};

/// Unknown schema profile or a broken profile definition.
class SchemaError : public Error {
public:
  using Error::Error;
};

/// Bad configuration value or type.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Missing or unreadable files.
class IoError : public Error {
public:
  using Error::Error;
};

/// Tensor shape mismatch, bad backward call and similar engine misuse.
class ShapeError : public Error {
public:
  using Error::Error;
};

} // namespace medre
