#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace b2u {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree. `dimension` names the offending axis ("n", "c", "h", "w", ...).
class ShapeError : public Error {
public:
    ShapeError(std::string dimension, const std::string& message)
        : Error("shape error [" + dimension + "]: " + message), dimension_(std::move(dimension)) {}

    const std::string& dimension() const noexcept { return dimension_; }

private:
    std::string dimension_;
};

/// A value violates an operation's precondition.
class ValueError : public Error {
public:
    using Error::Error;
};

/// Bad configuration text, flags or noise spec strings.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents. `offset` is the byte position where parsing failed.
class FormatError : public Error {
public:
    FormatError(std::string message, std::size_t offset)
        : Error(message + " (at byte " + std::to_string(offset) + ")"),
          detail_(std::move(message)),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }
    /// Message without the offset suffix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::size_t offset_;
};

/// Filesystem failure; `path` is the file that could not be read or written.
class IoError : public Error {
public:
    IoError(std::string path, const std::string& message)
        : Error(message + ": " + path), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace b2u
