#pragma once

#include <stdexcept>
#include <string>

namespace dbp {

/// Base for every error raised by the library. `code()` is a stable token
/// that the CLI prints verbatim so scripts can grep for it.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// A precondition of an operation was violated.
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error("E_CONTRACT", what) {}
};

/// Tensor shapes do not chain.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error("E_DIMENSION", what) {}
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("E_NUMERIC", what) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error("E_PARSE", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("E_CONFIG", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("E_IO", what) {}
};

class UnsupportedFormatError : public Error {
public:
    explicit UnsupportedFormatError(const std::string& what) : Error("E_FORMAT", what) {}
};

}  // namespace dbp
