// Copyright (c) 2026 The xlfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace xlfuse {

// Error categories map onto CLI exit codes (see tools/).
enum class ErrorKind {
    io,
    parse,
    validation,
    infeasible,
    verification,
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                      : std::move(message)),
          kind_(kind),
          line_(line) {}

    ErrorKind kind() const { return kind_; }
    int line() const { return line_; }

private:
    ErrorKind kind_;
    int line_;
};

} // namespace xlfuse
