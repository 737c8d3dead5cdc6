#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memlab {

enum class ErrorCode {
    OddTurnCount,
    Transport,
    RateLimited,
    Malformed,
    Unparseable,
    DimensionMismatch,
    NonMonotonicIngest,
    CountOutOfRange,
    EmptyRubric,
    EmptyCandidates,
    LengthMismatch,
    Degenerate,
    Config,
    InvalidArgument,
    Io,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::OddTurnCount: return "OddTurnCount";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::Malformed: return "Malformed";
        case ErrorCode::Unparseable: return "Unparseable";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonMonotonicIngest: return "NonMonotonicIngest";
        case ErrorCode::CountOutOfRange: return "CountOutOfRange";
        case ErrorCode::EmptyRubric: return "EmptyRubric";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::Degenerate: return "Degenerate";
        case ErrorCode::Config: return "Config";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

// Every failure in the library surfaces as this type; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    // Transport failures and rate limits are worth another attempt.
    bool transient() const noexcept {
        return code_ == ErrorCode::Transport || code_ == ErrorCode::RateLimited;
    }

private:
    ErrorCode code_;
};

}  // namespace memlab
