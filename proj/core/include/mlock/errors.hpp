#pragma once

#include <stdexcept>
#include <string>

namespace mlock {

// Every domain error carries a stable code string so the CLI can print
// one machine-parseable line per failure.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define MLOCK_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

MLOCK_DEFINE_ERROR(SchemaError);
MLOCK_DEFINE_ERROR(FormatError);
MLOCK_DEFINE_ERROR(VersionError);
MLOCK_DEFINE_ERROR(TruncatedError);
MLOCK_DEFINE_ERROR(ChecksumError);
MLOCK_DEFINE_ERROR(CapabilityError);
MLOCK_DEFINE_ERROR(CapacityError);
MLOCK_DEFINE_ERROR(RecoveryFailed);
MLOCK_DEFINE_ERROR(DescriptorError);
MLOCK_DEFINE_ERROR(SampleError);
MLOCK_DEFINE_ERROR(TrainingDiverged);
MLOCK_DEFINE_ERROR(NotFound);
MLOCK_DEFINE_ERROR(InvalidArgument);

#undef MLOCK_DEFINE_ERROR

// Raised when a clock probe cannot agree with itself. Carries the spread of
// per-trial quantized values so callers can report it.
class UnstableFingerprint : public Error {
 public:
  UnstableFingerprint(const std::string& what, unsigned long long lo, unsigned long long hi)
      : Error("UnstableFingerprint", what), lo_(lo), hi_(hi) {}

  unsigned long long spread_low() const noexcept { return lo_; }
  unsigned long long spread_high() const noexcept { return hi_; }

 private:
  unsigned long long lo_;
  unsigned long long hi_;
};

}  // namespace mlock
