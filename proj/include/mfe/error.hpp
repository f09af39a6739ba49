#pragma once

#include <stdexcept>
#include <string>

namespace mfe {

/// Integer overflow in exact money or rational arithmetic.
class OverflowError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

/// A scenario, record or assignment violates a structural invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries a 1-based line/column when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long line = 0, long column = 0)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                                            std::to_string(column) + ")"
                                      : what),
          line_(line),
          column_(column) {}

    long line() const noexcept { return line_; }
    long column() const noexcept { return column_; }

private:
    long line_;
    long column_;
};

/// Lookup of an id that does not exist in the network.
class UnknownIdError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

}  // namespace mfe
