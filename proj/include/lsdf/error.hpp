#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lsdf {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed case text. `line()` is 1-based; 0 when no line applies.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Structurally inconsistent network data (bad references, unsupported
/// elements).
class CaseError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes or provenance do not match.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, no samples).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Scenario generation could not produce enough converged power flows.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written, or its contents are inconsistent.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lsdf
