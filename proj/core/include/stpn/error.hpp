#pragma once

#include <stdexcept>
#include <string>

namespace stpn {

/// Shape or extent disagreement between operands.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed files, bad magic bytes, truncated streams, unknown config keys.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values where the contract requires finite ones.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad command-line usage (unknown flag, unparseable value).
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stpn
