#include "btsim/error.hpp"

namespace btsim {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::kPairingFailure: return "pairing-failure";
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kFormat: return "format-error";
    case ErrorKind::kUnsupportedMesh: return "unsupported-mesh";
    case ErrorKind::kDimension: return "dimension-error";
    case ErrorKind::kSupport: return "support-error";
    case ErrorKind::kNoEncoding: return "no-encoding";
    case ErrorKind::kConstraint: return "constraint-error";
    case ErrorKind::kProjection: return "projection-error";
    case ErrorKind::kConfiguration: return "configuration-error";
    case ErrorKind::kSolverFailure: return "solver-failure";
    case ErrorKind::kInstability: return "instability";
    case ErrorKind::kIo: return "io-error";
  }
  return "unknown";
}

}  // namespace btsim
