#pragma once

#include <stdexcept>
#include <string>

namespace cpfts {

/// Broad failure class, used by the CLI to choose an exit code.
enum class ErrorCategory {
    usage,    ///< bad arguments or configuration
    data,     ///< unreadable, malformed or misaligned input
    numeric,  ///< estimation or calibration failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

struct InsufficientData : Error {
    explicit InsufficientData(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

struct InvalidK : Error {
    explicit InvalidK(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

struct AlignmentError : Error {
    explicit AlignmentError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct NonCalibrable : Error {
    explicit NonCalibrable(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

struct InvalidInterval : Error {
    explicit InvalidInterval(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

struct StreamError : Error {
    explicit StreamError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error(ErrorCategory::data, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct ImputationError : Error {
    explicit ImputationError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

}  // namespace cpfts
