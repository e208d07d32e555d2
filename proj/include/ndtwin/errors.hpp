#pragma once

#include <stdexcept>
#include <string>

namespace ndtwin {

/// Malformed input file or datagram.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally valid input that violates a domain invariant; the message
/// names the offending element.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ndtwin
