#include "sgdclt/errors.hpp"

namespace sgdclt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::NotSPD: return "NotSPD";
    case ErrorCode::NotStable: return "NotStable";
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DenominatorVanishes: return "DenominatorVanishes";
    case ErrorCode::NonCommuting: return "NonCommuting";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::IncompatiblePair: return "IncompatiblePair";
    case ErrorCode::DegenerateSigma: return "DegenerateSigma";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::WrongRegime: return "WrongRegime";
    case ErrorCode::SampleSizeOutOfRange: return "SampleSizeOutOfRange";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
  }
  return "Unknown";
}

bool is_config_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Config:
    case ErrorCode::Io:
    case ErrorCode::WrongRegime:
    case ErrorCode::IncompatiblePair:
    case ErrorCode::InvalidRange:
      return true;
    default:
      return false;
  }
}

}  // namespace sgdclt
