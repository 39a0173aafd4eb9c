#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sketch2svg {

/// Every failure class the library reports. Callers switch on the code;
/// the message is for humans.
enum class ErrorCode {
    // shape grammar
    MalformedJson,
    UnknownShapeType,
    UnknownColor,
    MissingRequiredField,
    NonPositiveScale,
    UnknownField,
    InvalidValue,
    CanvasMismatch,
    // rendering / images
    RenderBackendFailure,
    EncodingFailure,
    InvalidImage,
    // model gateway
    BackendUnavailable,
    MalformedModelOutput,
    // loop
    InitialProgramInvalid,
    InvalidOverride,
    InvalidConfig,
    InvalidState,
    // store / replay
    UnknownSession,
    OutOfOrderRecord,
    StorageFailure,
    ReplayDivergence,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedJson: return "MalformedJson";
        case ErrorCode::UnknownShapeType: return "UnknownShapeType";
        case ErrorCode::UnknownColor: return "UnknownColor";
        case ErrorCode::MissingRequiredField: return "MissingRequiredField";
        case ErrorCode::NonPositiveScale: return "NonPositiveScale";
        case ErrorCode::UnknownField: return "UnknownField";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::CanvasMismatch: return "CanvasMismatch";
        case ErrorCode::RenderBackendFailure: return "RenderBackendFailure";
        case ErrorCode::EncodingFailure: return "EncodingFailure";
        case ErrorCode::InvalidImage: return "InvalidImage";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::MalformedModelOutput: return "MalformedModelOutput";
        case ErrorCode::InitialProgramInvalid: return "InitialProgramInvalid";
        case ErrorCode::InvalidOverride: return "InvalidOverride";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidState: return "InvalidState";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::OutOfOrderRecord: return "OutOfOrderRecord";
        case ErrorCode::StorageFailure: return "StorageFailure";
        case ErrorCode::ReplayDivergence: return "ReplayDivergence";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string pointer = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          pointer_(std::move(pointer)) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

    /// JSON pointer of the offending value, empty when not applicable.
    [[nodiscard]] const std::string& pointer() const noexcept { return pointer_; }

private:
    ErrorCode code_;
    std::string pointer_;
};

}  // namespace sketch2svg
