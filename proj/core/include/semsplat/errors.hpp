#pragma once

#include <stdexcept>
#include <string>

namespace semsplat {

/// Caller broke a precondition (shape mismatch, invalid argument).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Bad or unreadable input data (files, configs, sequences).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A data invariant failed to hold during a run.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace semsplat
