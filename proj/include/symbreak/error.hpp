#pragma once

#include <stdexcept>
#include <string>

namespace symbreak {

/// Raised when a caller breaks a documented precondition (bad index, size mismatch, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed external input (data files, config files, CLI values).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace symbreak
