#pragma once

#include <stdexcept>
#include <string>

namespace pks {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid arguments or violated preconditions (bad indices, mismatched
/// spaces, non-web input, ...).
class domain_error : public error {
public:
    explicit domain_error(const std::string& what) : error(what) {}
};

/// A size limit was exceeded (joint-state cap, component-count cap).
class capacity_error : public error {
public:
    explicit capacity_error(const std::string& what) : error(what) {}
};

/// Malformed input text. Carries 1-based line/column of the offending token.
class parse_error : public error {
public:
    parse_error(std::size_t line, std::size_t column, const std::string& message)
        : error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                ": " + message),
          line_(line),
          column_(column),
          message_(message) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string message_;
};

/// Well-formed input that violates semantic rules (rows not summing to one,
/// negative entries, shape mismatches).
class validation_error : public error {
public:
    explicit validation_error(const std::string& what) : error(what) {}
};

} // namespace pks
