#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace humsearch {

/// Base for every error raised by the library. Carries a stable machine code
/// (used by the HTTP layer and the CLI exit status) next to the message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define HUMSEARCH_DEFINE_ERROR(Name)                                           \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(#Name, message) {}   \
    };

HUMSEARCH_DEFINE_ERROR(OutOfBounds)
HUMSEARCH_DEFINE_ERROR(UnknownProblem)
HUMSEARCH_DEFINE_ERROR(InvalidSpec)
HUMSEARCH_DEFINE_ERROR(SingularCovariance)
HUMSEARCH_DEFINE_ERROR(InsufficientHistory)
HUMSEARCH_DEFINE_ERROR(InvalidDistribution)
HUMSEARCH_DEFINE_ERROR(MismatchedSupport)
HUMSEARCH_DEFINE_ERROR(InvalidK)
HUMSEARCH_DEFINE_ERROR(EmptyRecords)
HUMSEARCH_DEFINE_ERROR(UnknownSubject)
HUMSEARCH_DEFINE_ERROR(EmptyDataset)
HUMSEARCH_DEFINE_ERROR(SchemaError)
HUMSEARCH_DEFINE_ERROR(SessionFinished)
HUMSEARCH_DEFINE_ERROR(UnknownSession)
HUMSEARCH_DEFINE_ERROR(LpFailure)

#undef HUMSEARCH_DEFINE_ERROR

/// Malformed input file; `line()` is 1-based (0 when not line-specific).
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error("ParseError", "line " + std::to_string(line) + ": " + message), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace humsearch
