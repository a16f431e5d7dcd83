#pragma once

#include <stdexcept>
#include <string>

namespace otg {

enum class ErrorKind {
  InvalidDuration,
  InvalidParameter,
  SingularSystem,
  OutOfLimits,
  TimeAllocationFailure,
  StaleInput,
  Parse,
  Validation,
  Topology,
  ChainResolution,
  Input,
  DofMismatch,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace otg
