#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sepsis {

/// Base class for all pipeline failures. `exit_code()` is what the CLI
/// returns when the exception escapes a subcommand.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
    virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed input file or artifact. Row and column are 1-based; 0 means
/// "not applicable".
class SchemaError : public Error {
public:
    SchemaError(const std::string& source, std::size_t row, std::size_t column,
                const std::string& message);
    explicit SchemaError(const std::string& message) : Error(message) {}

    int exit_code() const noexcept override { return 2; }
    const char* kind() const noexcept override { return "schema"; }

    const std::string& source() const noexcept { return source_; }
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string source_;
    std::size_t row_ = 0;
    std::size_t column_ = 0;
};

/// A configuration that cannot be satisfied (impossible onset window,
/// stratum too small to split, ...).
class InfeasibleError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
    const char* kind() const noexcept override { return "infeasible"; }
};

/// Non-finite inputs or a degenerate optimisation problem.
class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
    const char* kind() const noexcept override { return "numerical"; }
};

} // namespace sepsis
