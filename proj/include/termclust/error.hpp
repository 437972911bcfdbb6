#pragma once

#include <stdexcept>
#include <string>

namespace termclust {

/// Error category. The CLI maps each kind onto a process exit code.
enum class ErrorKind {
    validation,  ///< bad arguments or configuration
    data,        ///< malformed or inconsistent input files
    numeric,     ///< non-finite values or numerical breakdown
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& what) { throw Error(ErrorKind::validation, what); }
[[noreturn]] inline void fail_data(const std::string& what) { throw Error(ErrorKind::data, what); }
[[noreturn]] inline void fail_numeric(const std::string& what) { throw Error(ErrorKind::numeric, what); }

}  // namespace termclust
