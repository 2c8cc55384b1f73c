#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes do not agree with what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// User-supplied parameters are out of their admissible range.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Source and target domains coincide elementwise. The translation likelihood
/// is then constant in the translator parameters and nothing can be learned.
class DiracDegeneracyError : public ValidationError {
 public:
  DiracDegeneracyError()
      : ValidationError(
            "degenerate paired data: source and target are elementwise identical, "
            "so the target is a Dirac distribution given the source and the translator "
            "cannot be optimized") {}
};

/// Malformed file content. `offset` is the byte position where decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed file whose content does not fit the requested use.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(int epoch)
      : Error("training diverged: non-finite loss in epoch " + std::to_string(epoch)),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Timestep selection found no crossing of the distance curves.
class SelectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmt
