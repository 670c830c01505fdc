// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace evpv {

/// Base for every error raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A session, charger or scenario breaks one of its structural invariants.
class InvalidScenario : public Error {
public:
    explicit InvalidScenario(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// Input file could not be opened or read.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input file is readable but malformed. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& what);
    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Two containers that must agree in shape do not.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

} // namespace evpv
