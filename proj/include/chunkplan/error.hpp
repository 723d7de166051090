#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chunkplan {

enum class ErrorKind {
    parse,
    validation,
    uncommon_graph,
    chunk_too_small,
    consistency,
    infeasible,
    oracle_limit,
    invalid_argument,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parse: return "parse";
        case ErrorKind::validation: return "validation";
        case ErrorKind::uncommon_graph: return "uncommon_graph";
        case ErrorKind::chunk_too_small: return "chunk_too_small";
        case ErrorKind::consistency: return "consistency";
        case ErrorKind::infeasible: return "infeasible";
        case ErrorKind::oracle_limit: return "oracle_limit";
        case ErrorKind::invalid_argument: return "invalid_argument";
    }
    return "unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace chunkplan
