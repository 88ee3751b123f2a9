#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace ecam {

// Root of every error the library throws. Callers that only need to report
// can catch this; callers that need to branch catch the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths of operands do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but mathematically unusable (zero vector, all-zero
// heatmap, antipodal mean).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// A value left the finite range during construction of a tensor.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Required data absent: empty member list, missing container entry, ...
class MissingDataError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its documented domain.
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

// A persisted object loaded fine but violates its own invariant.
class InvariantViolationError : public Error {
 public:
  using Error::Error;
};

// Annotation file parsed but the annotation itself is unusable.
class InvalidAnnotationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes or text. Carries the byte offset (binary inputs) or the
// 1-based line number (text inputs) where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::optional<std::size_t> byte_offset,
             std::optional<std::size_t> line = std::nullopt)
      : Error(what), byte_offset_(byte_offset), line_(line) {}

  std::optional<std::size_t> byte_offset() const { return byte_offset_; }
  std::optional<std::size_t> line() const { return line_; }

 private:
  std::optional<std::size_t> byte_offset_;
  std::optional<std::size_t> line_;
};

}  // namespace ecam
