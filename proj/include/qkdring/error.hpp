#pragma once

#include <stdexcept>
#include <string>

namespace qkdring {

/// Invalid input or a violated invariant. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Failure while evaluating a well-formed request (numerical breakdown,
/// inconsistent intermediate state, I/O). The CLI maps this to exit code 3.
class RuntimeError : public std::runtime_error {
public:
    explicit RuntimeError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

}  // namespace qkdring
