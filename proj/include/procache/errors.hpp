#pragma once

#include <stdexcept>
#include <string>

namespace procache {

/// Invalid configuration, argument, or file content. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The constrained space admits no pattern for the request. CLI exit code 3.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or an undefined metric at run time. CLI exit code 4.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The engine was asked to reuse a cache entry that was never filled. CLI exit code 4.
class RunStateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace procache
