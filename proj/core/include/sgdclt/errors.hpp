#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sgdclt {

enum class ErrorCode {
  InvalidArgument,
  Config,
  Io,
  NotSPD,
  NotStable,
  NotHurwitz,
  SingularSystem,
  DenominatorVanishes,
  NonCommuting,
  NoConvergence,
  NonConvergent,
  InvalidRange,
  IncompatiblePair,
  DegenerateSigma,
  NonFinite,
  TooManyFailures,
  WrongRegime,
  SampleSizeOutOfRange,
  DegenerateSample,
};

/// Machine-readable name, e.g. "NotSPD".
std::string_view to_string(ErrorCode code) noexcept;

/// Errors that come from a bad experiment description map to exit code 2,
/// numeric failures to exit code 3.
bool is_config_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sgdclt
