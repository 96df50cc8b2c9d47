#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace accelcal {

/// Base class for all library errors that are not plain invalid arguments.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CSV or manifest content could not be parsed; carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A segment is too short for the requested operation.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// A linear system's design matrix did not reach full rank.
class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, int rank)
      : Error(what + " (rank " + std::to_string(rank) + ")"), rank_(rank) {}
  int rank() const { return rank_; }

 private:
  int rank_;
};

/// A residual degenerated (measurement coincides with the bias estimate).
class SingularResidualError : public Error {
 public:
  using Error::Error;
};

/// Tensor or layer shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called on an object in the wrong state
/// (e.g. windowing an unlabeled recording).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Paired test with zero variance of the differences.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

/// A gradient or loss became non-finite during training; names the tensor.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

}  // namespace accelcal
