#pragma once

#include <stdexcept>
#include <string>

namespace btsim {

// Failure categories. The C API maps these onto its status codes.
enum class ErrorKind {
  kInvalidArgument,
  kDegenerateGeometry,
  kPairingFailure,
  kParse,
  kFormat,
  kUnsupportedMesh,
  kDimension,
  kSupport,
  kNoEncoding,
  kConstraint,
  kProjection,
  kConfiguration,
  kSolverFailure,
  kInstability,
  kIo,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace btsim
