#pragma once

#include <stdexcept>
#include <string>

namespace pnp {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidSpec,
  kInvalidState,
  kRangeError,
  kDegenerateParameters,
  kOutOfManifold,
  kNumericFailure,
  kUndefinedConditioning,
  kKernelProbe,
  kTrainingDivergence,
  kConfig,
  kCacheMismatch,
  kMissingArtifact,
  kIo,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace pnp
