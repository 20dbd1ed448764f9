/*
 * Copyright 2026 The uso Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef USO_ERROR_HPP
#define USO_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uso {

/// Failure categories shared by every module. The C API maps these onto
/// status codes one-to-one.
enum class ErrorKind {
    InvalidArgument,
    Syntax,
    DuplicateRecord,
    UnknownDirective,
    MissingNetlist,
    MissingMetric,
    NonFiniteMetric,
    EmptyBuffer,
    Concurrency,
    CholeskyFailure,
    NoParseableSuggestion,
    AdvisorUnavailable,
    Config,
    Io,
    Runtime,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised by the KS/1 reader. `line()` is 1-based and counts every physical
/// line of the input, including blanks and comments.
class ParseError : public Error {
public:
    ParseError(ErrorKind kind, std::size_t line, const std::string& reason);

    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

}  // namespace uso

#endif  // USO_ERROR_HPP
