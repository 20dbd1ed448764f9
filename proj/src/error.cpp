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

#include "uso/error.hpp"

namespace uso {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::DuplicateRecord: return "DuplicateRecord";
    case ErrorKind::UnknownDirective: return "UnknownDirective";
    case ErrorKind::MissingNetlist: return "MissingNetlist";
    case ErrorKind::MissingMetric: return "MissingMetric";
    case ErrorKind::NonFiniteMetric: return "NonFiniteMetric";
    case ErrorKind::EmptyBuffer: return "EmptyBuffer";
    case ErrorKind::Concurrency: return "ConcurrencyViolation";
    case ErrorKind::CholeskyFailure: return "CholeskyFailure";
    case ErrorKind::NoParseableSuggestion: return "NoParseableSuggestion";
    case ErrorKind::AdvisorUnavailable: return "AdvisorUnavailable";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Runtime: return "RuntimeError";
    }
    return "Unknown";
}

ParseError::ParseError(ErrorKind kind, std::size_t line, const std::string& reason)
    : Error(kind, std::string(to_string(kind)) + " at line " + std::to_string(line) + ": " + reason),
      line_(line),
      reason_(reason) {}

}  // namespace uso
