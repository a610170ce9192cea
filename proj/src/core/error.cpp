#include "sortlab/error.hpp"

namespace sortlab {

const char* error_category(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::construction: return "construction";
        case ErrorKind::shape: return "shape";
        case ErrorKind::usage: return "usage";
        case ErrorKind::evaluation: return "evaluation";
        case ErrorKind::input: return "input";
        case ErrorKind::config: return "config";
        case ErrorKind::generation: return "generation";
        case ErrorKind::io: return "io";
        case ErrorKind::version: return "version";
        case ErrorKind::corruption: return "corruption";
        case ErrorKind::parse: return "parse";
        case ErrorKind::compatibility: return "compatibility";
        case ErrorKind::lookup: return "lookup";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

}  // namespace sortlab
