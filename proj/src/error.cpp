#include "odc/error.hpp"

namespace odc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::AllEmpty: return "AllEmpty";
    case ErrorCode::Unsatisfiable: return "Unsatisfiable";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace odc
