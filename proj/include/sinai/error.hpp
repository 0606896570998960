#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sinai {

enum class ErrorCode {
    OverlappingScatterers,
    DegenerateLattice,
    UnsupportedFamily,
    IndexOutOfRange,
    NoCollisionWithinBound,
    GrazingInput,
    SingularOrbit,
    NonConvergence,
    BudgetExceeded,
    InvalidInput,
    UnsupportedPotential,
    InsufficientData,
    EmptyCensus,
    ConfigError,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::OverlappingScatterers: return "OverlappingScatterers";
    case ErrorCode::DegenerateLattice: return "DegenerateLattice";
    case ErrorCode::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NoCollisionWithinBound: return "NoCollisionWithinBound";
    case ErrorCode::GrazingInput: return "GrazingInput";
    case ErrorCode::SingularOrbit: return "SingularOrbit";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::UnsupportedPotential: return "UnsupportedPotential";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptyCensus: return "EmptyCensus";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace sinai
