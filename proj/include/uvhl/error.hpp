#pragma once

#include <stdexcept>
#include <string>

namespace uvhl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Malformed cell in an input file; the message carries the row/column.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row, long column)
      : Error(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  long row() const { return row_; }
  long column() const { return column_; }

 private:
  long row_;
  long column_;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what + " at epoch " + std::to_string(epoch)), epoch_(epoch) {}

  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double final_gap)
      : Error(what), final_gap_(final_gap) {}

  double final_gap() const { return final_gap_; }

 private:
  double final_gap_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace uvhl
