#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sweet {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    ok = 0,
    other = 1,
    usage = 2,
    format = 3,
    numeric = 4,
    capability = 5,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] virtual ExitCode exit_code() const noexcept { return ExitCode::other; }
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

class LayoutError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

class ProtocolError : public Error {
public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

// Target does not fit the source template (inherit needs a smaller target).
class CapabilityError : public Error {
public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::capability; }
};

class NumericError : public Error {
public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

class CalibrationError : public NumericError {
public:
    using NumericError::NumericError;
};

class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    [[nodiscard]] std::uint64_t offset() const noexcept { return offset_; }
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::format; }

private:
    std::uint64_t offset_;
};

class IoError : public Error {
public:
    IoError(const std::string& what, std::string path)
        : Error(what + ": " + path), path_(std::move(path)) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace sweet
