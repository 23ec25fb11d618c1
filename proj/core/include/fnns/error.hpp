#pragma once

#include <stdexcept>
#include <string>

namespace fnns {

/// Operand shapes do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent file contents (IDX, FNNS containers, DB lines).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lookup of an unknown key (profile id, fingerprint record, mock variant).
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace fnns
