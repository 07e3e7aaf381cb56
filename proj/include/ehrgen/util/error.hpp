#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ehrgen {

// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text; `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A record violates the cohort schema.
class SchemaError : public Error {
 public:
  SchemaError(std::string patient_id, std::string field, const std::string& what)
      : Error("patient '" + patient_id + "', field '" + field + "': " + what),
        patient_id_(std::move(patient_id)),
        field_(std::move(field)) {}
  const std::string& patient_id() const noexcept { return patient_id_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string patient_id_;
  std::string field_;
};

// Artifact written with an unsupported format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

// Caller broke an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or degenerate numerical input.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ehrgen
