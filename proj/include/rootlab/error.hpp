#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rootlab {

enum class ErrorCode {
    MeanMismatch,
    IdenticalMeasures,
    NotConvexOrdered,
    DegenerateInput,
    InvalidMeasure,
    OutOfDomain,
    InvalidDiffusion,
    GridTooCoarse,
    ProjectionDiverged,
    ObstacleAboveInitial,
    GridMismatch,
    OutOfRange,
    CensoredExcess,
    ProbeOutsideGrid,
    DomainViolation,
    HorizonTooShort,
    MissingLambda,
    PeelingStalled,
    ChainMismatch,
    InvalidCost,
    InvalidConfig,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MeanMismatch: return "MeanMismatch";
    case ErrorCode::IdenticalMeasures: return "IdenticalMeasures";
    case ErrorCode::NotConvexOrdered: return "NotConvexOrdered";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidMeasure: return "InvalidMeasure";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::InvalidDiffusion: return "InvalidDiffusion";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::ProjectionDiverged: return "ProjectionDiverged";
    case ErrorCode::ObstacleAboveInitial: return "ObstacleAboveInitial";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::CensoredExcess: return "CensoredExcess";
    case ErrorCode::ProbeOutsideGrid: return "ProbeOutsideGrid";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::MissingLambda: return "MissingLambda";
    case ErrorCode::PeelingStalled: return "PeelingStalled";
    case ErrorCode::ChainMismatch: return "ChainMismatch";
    case ErrorCode::InvalidCost: return "InvalidCost";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Error raised by every rootlab operation. `field` names the offending
/// input when one can be identified (config path, argument name).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string field = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), field_(std::move(field)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

}  // namespace rootlab
