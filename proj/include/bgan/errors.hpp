#pragma once

#include <stdexcept>
#include <string>

namespace bgan {

/// Bad user input: configs, shapes, out-of-range parameters. CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A loss went non-finite during optimization. CLI exit code 3.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class IoErrc {
    open_failed,
    write_failed,
    bad_magic,
    version_mismatch,
    truncated,
    non_finite,
    out_of_range,
    hash_mismatch,
    malformed,
};

const char* to_string(IoErrc code) noexcept;

/// Anything that goes wrong reading or writing artifacts. CLI exit code 4.
class IoError : public std::runtime_error {
public:
    IoError(IoErrc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    IoErrc code() const noexcept { return code_; }

private:
    IoErrc code_;
};

}  // namespace bgan
