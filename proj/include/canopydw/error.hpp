#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace canopydw {

enum class ErrorKind {
    InvalidDate,
    InvalidMetadata,
    Parse,
    Range,
    Integrity,
    CorruptTable,
    Io,
    UnknownSpecies,
    Duplicate,
    StaleMatch,
    UnknownId,
    InvalidSpec,
    EmptyInput,
    EmptyWarehouse,
    Locked,
    MixedUnits, ///< a coordinate is not a finite planar value
    Usage,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base of every error raised by the library. `kind()` drives the CLI exit
/// code and the HTTP status mapping; `line()` is 0 when no source line applies.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what, std::size_t line = 0)
        : std::runtime_error(what), kind_(kind), line_(line) {}

    ErrorKind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    ErrorKind kind_;
    std::size_t line_;
};

} // namespace canopydw
