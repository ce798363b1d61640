#pragma once

#include <stdexcept>
#include <string>

namespace recon {

// Precondition / invariant breach by the caller. Not recoverable at runtime.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// File / serialization problems.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// World construction could not satisfy its spec within bounded retries.
class WorldGenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace recon
