#pragma once

#include <stdexcept>
#include <string>

namespace glassbox {

// Base for everything the toolkit throws. `code()` is the stable
// machine-readable identifier used by the CLI on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// Bad usage: malformed config, missing flags, invalid parameters.
class UsageError : public Error {
public:
    using Error::Error;
};

// Bad data: unreadable files, malformed cells, shape mismatches.
class DataError : public Error {
public:
    using Error::Error;
};

// Numeric failure: non-finite losses, degenerate denominators.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace glassbox
