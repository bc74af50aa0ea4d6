#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace svbrd {

enum class ErrorCode {
    // trajectory ingestion
    TooShort,
    NonFinite,
    NonPositiveParameter,
    InvalidFrame,
    WindowLongerThanTrajectory,
    InvalidArgument,
    // predicate DSL and rules
    SyntaxError,
    UnknownAtom,
    NonFiniteLiteral,
    InvalidRange,
    UnitMismatch,
    // persistence and schemas
    CorruptFile,
    MissingVersion,
    ValidationFailed,
    SchemaViolation,
    IoError,
    // LLM bridge
    EmptySampleSet,
    BudgetExceeded,
    Timeout,
    BackendError,
    RetriesExhausted,
    // verification / classification / evaluation
    EmptyValidationSet,
    NoApplicableRules,
    InvalidHorizon,
    LengthMismatch,
    EmptyInput,
    DegenerateLabels,
    // synthetic data
    InfeasibleProfile,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
        case ErrorCode::InvalidFrame: return "InvalidFrame";
        case ErrorCode::WindowLongerThanTrajectory: return "WindowLongerThanTrajectory";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UnknownAtom: return "UnknownAtom";
        case ErrorCode::NonFiniteLiteral: return "NonFiniteLiteral";
        case ErrorCode::InvalidRange: return "InvalidRange";
        case ErrorCode::UnitMismatch: return "UnitMismatch";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::MissingVersion: return "MissingVersion";
        case ErrorCode::ValidationFailed: return "ValidationFailed";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::EmptySampleSet: return "EmptySampleSet";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::BackendError: return "BackendError";
        case ErrorCode::RetriesExhausted: return "RetriesExhausted";
        case ErrorCode::EmptyValidationSet: return "EmptyValidationSet";
        case ErrorCode::NoApplicableRules: return "NoApplicableRules";
        case ErrorCode::InvalidHorizon: return "InvalidHorizon";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::InfeasibleProfile: return "InfeasibleProfile";
    }
    return "Unknown";
}

/// Base exception for every failure raised by the library. The code is
/// stable and is what callers (and tests) should branch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by the predicate parser; carries the 0-based character offset
/// of the offending token.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t position, const std::string& message)
        : Error(code, message + " at position " + std::to_string(position)),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Non-success HTTP exchange with a chat-completion backend.
class BackendFailure : public Error {
public:
    BackendFailure(ErrorCode code, int status, std::string body, const std::string& message)
        : Error(code, message), status_(status), body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

}  // namespace svbrd
