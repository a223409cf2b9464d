#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace h2sim {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid shapes, parameters or engine settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerically invalid payloads (NaN/Inf weights, out-of-range labels).
class DataError : public Error {
public:
    using Error::Error;
};

/// An engine stage was fed data in the wrong order or incomplete.
class SequencingError : public Error {
public:
    using Error::Error;
};

/// Internal redundancy check failed (e.g. mask popcount vs stored values).
class CorruptedStateError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t position)
        : Error(message + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace h2sim
