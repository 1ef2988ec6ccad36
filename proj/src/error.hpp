#pragma once

#include <stdexcept>
#include <string>

namespace agentsim {

// Error taxonomy shared across the library. The category maps 1:1 onto the
// C API status codes and the CLI exit-code contract.
enum class ErrorKind {
    InvalidArgument,  // bad operation input (off-grid sms, eta out of range, ...)
    Validation,       // malformed or inconsistent config / profile document
    Protocol,         // internal state-machine violation; indicates a simulator bug
    Io,               // file read/write failure
    NoData,           // metric requested over an empty scope
    Infeasible,       // SLO infeasible (Eq. constraints) or reservation > device
};

class SimError : public std::runtime_error {
public:
    SimError(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_invalid(const std::string& msg) {
    throw SimError(ErrorKind::InvalidArgument, msg);
}
[[noreturn]] inline void throw_validation(const std::string& msg) {
    throw SimError(ErrorKind::Validation, msg);
}
[[noreturn]] inline void throw_protocol(const std::string& msg) {
    throw SimError(ErrorKind::Protocol, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
    throw SimError(ErrorKind::Io, msg);
}
[[noreturn]] inline void throw_no_data(const std::string& msg) {
    throw SimError(ErrorKind::NoData, msg);
}
[[noreturn]] inline void throw_infeasible(const std::string& msg) {
    throw SimError(ErrorKind::Infeasible, msg);
}

}  // namespace agentsim
