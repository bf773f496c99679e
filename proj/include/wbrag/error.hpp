#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wbrag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised while reading a line-delimited input file. Carries the 1-based line.
class LoadError : public Error {
public:
    LoadError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised by generation and embedding providers.
class BackendError : public Error {
public:
    using Error::Error;
};

}  // namespace wbrag
