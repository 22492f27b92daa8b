#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace covr {

/// Failure classes. The CLI maps each class onto a fixed exit code.
enum class ErrorKind {
    shape,    // dimension mismatch between operands
    config,   // invalid option or hyperparameter
    input,    // precondition violated by caller-supplied values
    data,     // dataset content (unknown id, invariant violation, parse failure)
    format,   // binary container is corrupt or truncated
    io,       // file cannot be opened or written
    numeric,  // non-finite values during evaluation or training
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::shape: return "shape error";
        case ErrorKind::config: return "config error";
        case ErrorKind::input: return "input error";
        case ErrorKind::data: return "data error";
        case ErrorKind::format: return "format error";
        case ErrorKind::io: return "I/O error";
        case ErrorKind::numeric: return "numeric error";
    }
    return "error";
}

class Error : public std::runtime_error {
   public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

   private:
    ErrorKind kind_;
};

/// Raised by the binary readers; carries the byte offset where decoding failed.
class FormatError : public Error {
   public:
    FormatError(const std::string& message, std::uint64_t offset)
        : Error(ErrorKind::format, message + " at byte offset " + std::to_string(offset)),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

   private:
    std::uint64_t offset_;
};

inline Error shape_error(const std::string& m) { return Error(ErrorKind::shape, m); }
inline Error config_error(const std::string& m) { return Error(ErrorKind::config, m); }
inline Error input_error(const std::string& m) { return Error(ErrorKind::input, m); }
inline Error data_error(const std::string& m) { return Error(ErrorKind::data, m); }
inline Error io_error(const std::string& m) { return Error(ErrorKind::io, m); }
inline Error numeric_error(const std::string& m) { return Error(ErrorKind::numeric, m); }

/// Exit code used by the command-line tool for each failure class.
inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::shape:
            return 2;
        case ErrorKind::input:
        case ErrorKind::data:
        case ErrorKind::format:
        case ErrorKind::io:
            return 3;
        case ErrorKind::numeric:
            return 4;
    }
    return 1;
}

}  // namespace covr
