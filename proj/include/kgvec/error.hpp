#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgvec {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed input record. Carries the 1-based line (or row) number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, const std::string& detail = {})
      : Error(what + " at line " + std::to_string(line) + (detail.empty() ? "" : ": " + detail)),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DatasetNotFound : public Error {
 public:
  explicit DatasetNotFound(const std::string& name)
      : Error("unknown dataset: " + name), name_(name) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

}  // namespace kgvec
