#pragma once

#include <stdexcept>
#include <string>

namespace banipa {

// Domain-level failure: bad input data, malformed files, violated contracts.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Wrong invocation rather than bad data; the CLI maps this to exit code 2.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(what) {}
};

}  // namespace banipa
