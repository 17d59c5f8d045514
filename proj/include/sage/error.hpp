#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sage {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A parameter or spec field violates its documented range.
class ValidationError : public Error {
public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Malformed input file. `location` is a line number (text formats) or a byte
/// offset (binary formats); `location_kind` says which.
class ParseError : public Error {
public:
  enum class Location { line, byte_offset };

  ParseError(const std::string& what, std::size_t location, Location kind)
      : Error(what + (kind == Location::line ? " (line " : " (byte offset ") +
              std::to_string(location) + ")"),
        location_(location), kind_(kind) {}

  std::size_t location() const noexcept { return location_; }
  Location location_kind() const noexcept { return kind_; }

private:
  std::size_t location_;
  Location kind_;
};

/// Well-formed input holding an invalid value (e.g. NaN) at `row`.
class DataError : public Error {
public:
  DataError(const std::string& what, std::size_t row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

/// Training or layout produced a non-finite value.
class DivergenceError : public Error {
public:
  using Error::Error;
};

}  // namespace sage
