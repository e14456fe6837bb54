#include "knock/error.hpp"

namespace knock {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "Usage";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::WidthMismatch: return "WidthMismatch";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::UnknownPreset: return "UnknownPreset";
    case ErrorKind::NoBimodalDistribution: return "NoBimodalDistribution";
    case ErrorKind::OracleUnusable: return "OracleUnusable";
    case ErrorKind::PairNotInTrace: return "PairNotInTrace";
    case ErrorKind::QuorumFailure: return "QuorumFailure";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::NoBasis: return "NoBasis";
  }
  return "Unknown";
}

}  // namespace knock
