#pragma once

#include <stdexcept>
#include <string>

namespace qcmol {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed arguments that violate an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or record.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A circuit uses a CNOT offset with no atom in the element alphabet.
class UnmappableOffset : public Error {
 public:
  using Error::Error;
};

}  // namespace qcmol
