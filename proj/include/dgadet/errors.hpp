#pragma once

#include <stdexcept>
#include <string>

namespace dgadet {

// Exit-code mapping: UsageError -> 1, InvariantError -> 2, IoError -> 3.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvariantError : std::runtime_error {
    explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvariantError(msg);
}

}  // namespace dgadet
