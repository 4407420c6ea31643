#pragma once

#include <stdexcept>
#include <string>

namespace wss {

// Raised when inputs violate a documented precondition or invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a run configuration is inconsistent or incomplete.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& message) {
    if (!cond) throw ValidationError(message);
}

} // namespace wss
