#include "nnsub/error.hpp"

namespace nnsub {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Dimension: return "DimensionError";
    case ErrorCode::Numeric: return "NumericError";
    case ErrorCode::NonNegativity: return "NonNegativityError";
    case ErrorCode::LabelMismatch: return "LabelMismatchError";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::Label: return "LabelError";
    case ErrorCode::InsufficientSamples: return "InsufficientSamplesError";
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Io: return "IoError";
  }
  return "UnknownError";
}

}  // namespace nnsub
