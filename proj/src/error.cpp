#include "conet/error.hpp"

namespace conet {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::OddDegreeSum: return "OddDegreeSum";
        case ErrorCode::InfeasibleDegree: return "InfeasibleDegree";
        case ErrorCode::GenerationFailure: return "GenerationFailure";
        case ErrorCode::NoFeasiblePair: return "NoFeasiblePair";
        case ErrorCode::NotAWalk: return "NotAWalk";
        case ErrorCode::InsufficientBins: return "InsufficientBins";
        case ErrorCode::BadBinning: return "BadBinning";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingArtifacts: return "MissingArtifacts";
        case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace conet
