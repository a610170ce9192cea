#pragma once

#include <stdexcept>
#include <string>

namespace sortlab {

enum class ErrorKind {
    construction,
    shape,
    usage,
    evaluation,
    input,
    config,
    generation,
    io,
    version,
    corruption,
    parse,
    compatibility,
    lookup,
};

// Stable lowercase name, used as the machine-readable category on the CLI.
const char* error_category(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }
    const char* category() const noexcept { return error_category(kind_); }

private:
    ErrorKind kind_;
};

}  // namespace sortlab
