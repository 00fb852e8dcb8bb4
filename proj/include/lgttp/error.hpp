// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lgttp {

enum class ErrorCode {
    InvalidInput,
    IoError,
    BadMagic,
    BadVersion,
    Truncated,
    NonFinite,
    Internal,
};

inline constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "invalid-input";
        case ErrorCode::IoError: return "io-error";
        case ErrorCode::BadMagic: return "bad-magic";
        case ErrorCode::BadVersion: return "bad-version";
        case ErrorCode::Truncated: return "truncated";
        case ErrorCode::NonFinite: return "non-finite";
        case ErrorCode::Internal: return "internal";
    }
    return "unknown";
}

/// Process exit code for the CLI: 1 internal, 2 invalid input, 3 I/O failure.
inline constexpr int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::IoError: return 3;
        case ErrorCode::Internal: return 1;
        default: return 2;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), m_code(code) {}

    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) {
        fail(ErrorCode::InvalidInput, what);
    }
}

}  // namespace lgttp
