#pragma once

#include <stdexcept>
#include <string>

namespace stabreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or missing input: unknown columns, unparseable cells, bad flags.
class InputError : public Error {
 public:
  using Error::Error;
};

// Input that parses but violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularDesignError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnderdeterminedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace stabreg
