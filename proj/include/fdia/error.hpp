#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fdia {

// Base class of every error raised by the library. The CLI maps subclasses of
// InputError to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Errors caused by malformed or inconsistent user input.
class InputError : public Error {
  public:
    using Error::Error;
};

class ValidationError : public InputError {
  public:
    using InputError::InputError;
};

class ParseError : public InputError {
  public:
    ParseError(std::string message, std::size_t line)
        : InputError("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

// JSON schema violation; path uses the `$.a.b[3]` notation.
class SchemaError : public InputError {
  public:
    SchemaError(std::string path, const std::string& message)
        : InputError(path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

  private:
    std::string path_;
};

class ConfigError : public InputError {
  public:
    using InputError::InputError;
};

class DegenerateBranchError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class ConnectivityError : public ValidationError {
  public:
    ConnectivityError(const std::string& message, std::vector<std::vector<std::size_t>> components)
        : ValidationError(message), components_(std::move(components)) {}

    const std::vector<std::vector<std::size_t>>& components() const noexcept { return components_; }

  private:
    std::vector<std::vector<std::size_t>> components_;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

}  // namespace fdia
