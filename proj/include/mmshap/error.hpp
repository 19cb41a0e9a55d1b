#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mmshap {

enum class Errc {
    DuplicateIndex,
    IndexGap,
    EmptySample,
    UnknownModality,
    LengthMismatch,
    IndexOutOfRange,
    UnknownSample,
    OracleTimeout,
    ProtocolViolation,
    OracleError,
    TokenizationMismatch,
    TooManyTokens,
    BudgetTooSmall,
    NoMaskableText,
    SingleModality,
    AllZeroContributions,
    TokenCountMismatch,
    EmptyInput,
    DegenerateInput,
    FileNotFound,
    ParseError,
    MissingAttributions,
    ConfigError,
};

std::string_view errc_name(Errc code);

/// Every failure raised by the library carries one of the codes above.
/// `line()` is only meaningful for ParseError (1-based input line).
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::size_t line = 0)
        : std::runtime_error(message), code_(code), line_(line) {}

    Errc code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }

private:
    Errc code_;
    std::size_t line_;
};

}  // namespace mmshap
