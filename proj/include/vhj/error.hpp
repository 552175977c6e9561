#pragma once

#include <stdexcept>
#include <string>

namespace vhj {

/// Failure categories. Each maps onto one process exit code in the CLI.
enum class ErrorKind {
    config,            ///< malformed or out-of-range configuration
    contract,          ///< precondition of an operation violated by the caller
    io,                ///< missing or unreadable artifact
    numerical_blowup,  ///< NaN/inf or gradient past the hard cap
    inconsistency,     ///< computed quantities contradict each other (e.g. crossing brackets)
    convergence        ///< an iteration failed to reach its tolerance
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::config: return "config";
        case ErrorKind::contract: return "contract";
        case ErrorKind::io: return "io";
        case ErrorKind::numerical_blowup: return "numerical_blowup";
        case ErrorKind::inconsistency: return "inconsistency";
        case ErrorKind::convergence: return "convergence";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Exit code convention: 0 pass, 1 verdict failure, 2 usage/config, 3 blow-up.
inline int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::config:
        case ErrorKind::contract:
        case ErrorKind::io: return 2;
        case ErrorKind::numerical_blowup: return 3;
        case ErrorKind::inconsistency:
        case ErrorKind::convergence: return 1;
    }
    return 2;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace vhj
