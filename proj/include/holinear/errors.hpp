#pragma once

#include <stdexcept>
#include <string>

namespace holinear {

// Error taxonomy. The code groups map onto CLI exit codes:
//   parse -> 2, classification -> 3, planning -> 4, iteration -> 5, numeric -> 6.
enum class ErrorCode {
    ParseError,
    SingularOperator,
    SpectralMismatch,
    NonHyperbolic,
    NotAlphaContracting,
    NotAlphaHyperbolic,
    CutoffNotFound,
    PlanInfeasible,
    DomainExceeded,
    DomainMismatch,
    DegenerateSample,
    AlphaMismatch,
    NotInvertibleBound,
    PreconditionLip,
    NoConvergence,
    SeriesDiverged,
    GraphTransformDiverged,
    ReparameterizationFailed,
    NotFlat,
    NotHLinear,
    InvertibilityLost,
    BadPlateau,
    ContractionLost,
    StepTooLarge,
    WrongDimension,
    BadPrecondition,
};

inline const char* error_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SingularOperator: return "SingularOperator";
        case ErrorCode::SpectralMismatch: return "SpectralMismatch";
        case ErrorCode::NonHyperbolic: return "NonHyperbolic";
        case ErrorCode::NotAlphaContracting: return "NotAlphaContracting";
        case ErrorCode::NotAlphaHyperbolic: return "NotAlphaHyperbolic";
        case ErrorCode::CutoffNotFound: return "CutoffNotFound";
        case ErrorCode::PlanInfeasible: return "PlanInfeasible";
        case ErrorCode::DomainExceeded: return "DomainExceeded";
        case ErrorCode::DomainMismatch: return "DomainMismatch";
        case ErrorCode::DegenerateSample: return "DegenerateSample";
        case ErrorCode::AlphaMismatch: return "AlphaMismatch";
        case ErrorCode::NotInvertibleBound: return "NotInvertibleBound";
        case ErrorCode::PreconditionLip: return "PreconditionLip";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::SeriesDiverged: return "SeriesDiverged";
        case ErrorCode::GraphTransformDiverged: return "GraphTransformDiverged";
        case ErrorCode::ReparameterizationFailed: return "ReparameterizationFailed";
        case ErrorCode::NotFlat: return "NotFlat";
        case ErrorCode::NotHLinear: return "NotHLinear";
        case ErrorCode::InvertibilityLost: return "InvertibilityLost";
        case ErrorCode::BadPlateau: return "BadPlateau";
        case ErrorCode::ContractionLost: return "ContractionLost";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::WrongDimension: return "WrongDimension";
        case ErrorCode::BadPrecondition: return "BadPrecondition";
    }
    return "UnknownError";
}

// CLI exit-code taxonomy (0 success).
inline int exit_code_of(ErrorCode c) {
    switch (c) {
        case ErrorCode::ParseError:
        case ErrorCode::WrongDimension:
            return 2;
        case ErrorCode::NonHyperbolic:
        case ErrorCode::NotAlphaContracting:
        case ErrorCode::NotAlphaHyperbolic:
            return 3;
        case ErrorCode::PlanInfeasible:
        case ErrorCode::CutoffNotFound:
            return 4;
        case ErrorCode::SeriesDiverged:
        case ErrorCode::NoConvergence:
        case ErrorCode::GraphTransformDiverged:
        case ErrorCode::ReparameterizationFailed:
        case ErrorCode::ContractionLost:
            return 5;
        default:
            return 6;
    }
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
    if (!ok) raise(code, what);
}

}  // namespace holinear
