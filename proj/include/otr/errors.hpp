#pragma once

#include <stdexcept>
#include <string>

namespace otr {

// Caller-supplied values that violate a precondition: bad indices, malformed
// weights, mismatched configs.
struct argument_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Problem size beyond a configured limit (e.g. the exact solver cap).
struct capacity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical breakdown at runtime: scaling underflow, non-finite intermediates.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file or config input. `line` is 1-based when known, -1 otherwise.
struct parse_error : std::runtime_error {
    explicit parse_error(const std::string& msg, long line_no = -1)
        : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg
                                         : msg),
          line(line_no) {}
    long line;
};

}  // namespace otr
