#pragma once

#include <stdexcept>
#include <string>

namespace bof {

// Malformed or inconsistent external data (files, probe text, checkpoints).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or numerically invalid states detected at runtime.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bof
