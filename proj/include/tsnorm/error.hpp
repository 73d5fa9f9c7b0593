#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsnorm {

// One exception type for the whole library. The code classifies the failure
// so callers (and the CLI's exit-code mapping) can react without string
// matching.
class Error : public std::runtime_error {
public:
    enum class Code {
        EmptyInput,
        NonFiniteInput,
        ShapeMismatch,
        IndexOutOfRange,
        InputTooShort,
        InvalidKernel,
        InvalidParams,
        StrategyUnresolved,
        NonFiniteLoss,
        EmptyDataset,
        FileNotFound,
        Parse,
        EmptySeries,
        IncompleteGrid,
        Config,
    };

    Error(Code code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

// Parse failures carry the offending cell so loaders can point at it.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& message)
        : Error(Code::Parse, message), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }     // 1-based file line
    std::size_t column() const noexcept { return column_; } // 1-based field index

private:
    std::size_t line_;
    std::size_t column_;
};

// CLI exit-code convention: 0 success, 1 config error, 2 data error,
// 3 numerical failure.
inline int exit_code_for(Error::Code code) {
    switch (code) {
        case Error::Code::Config:
        case Error::Code::InvalidParams:
            return 1;
        case Error::Code::FileNotFound:
        case Error::Code::Parse:
        case Error::Code::EmptySeries:
        case Error::Code::EmptyInput:
        case Error::Code::EmptyDataset:
        case Error::Code::InputTooShort:
        case Error::Code::ShapeMismatch:
        case Error::Code::IndexOutOfRange:
        case Error::Code::InvalidKernel:
        case Error::Code::StrategyUnresolved:
        case Error::Code::IncompleteGrid:
            return 2;
        case Error::Code::NonFiniteInput:
        case Error::Code::NonFiniteLoss:
            return 3;
    }
    return 3;
}

} // namespace tsnorm
