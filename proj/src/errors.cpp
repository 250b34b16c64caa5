#include "pnp/errors.hpp"

namespace pnp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidSpec: return "invalid-spec";
    case ErrorKind::kInvalidState: return "invalid-state";
    case ErrorKind::kRangeError: return "range-error";
    case ErrorKind::kDegenerateParameters: return "degenerate-parameters";
    case ErrorKind::kOutOfManifold: return "out-of-manifold";
    case ErrorKind::kNumericFailure: return "numeric-failure";
    case ErrorKind::kUndefinedConditioning: return "undefined-conditioning";
    case ErrorKind::kKernelProbe: return "kernel-probe";
    case ErrorKind::kTrainingDivergence: return "training-divergence";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kCacheMismatch: return "cache-mismatch";
    case ErrorKind::kMissingArtifact: return "missing-artifact";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace pnp
