#pragma once

#include <stdexcept>
#include <string>

namespace mrwave {

/// Base class for all errors raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Netlist syntax or semantic error with a 1-based source location.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
              message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Non-finite value produced by a device model, source or solver.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Linear solver hit a (numerically) zero pivot.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& message, int block)
      : Error(message + " (block " + std::to_string(block) + ")"), block_(block) {}

  int block() const { return block_; }

 private:
  int block_;
};

/// The frequency direction z̃ = A⁻¹z vanished; ω cannot be estimated.
class DegenerateFrequencyError : public Error {
 public:
  using Error::Error;
};

/// Envelope or transient step size fell below its floor.
class StepUnderflowError : public Error {
 public:
  using Error::Error;
};

/// Query outside the range covered by stored data.
class RangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace mrwave
