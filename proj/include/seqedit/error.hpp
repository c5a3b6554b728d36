// Copyright (C) 2026 seqedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace seqedit {

/// Failure classes. The CLI maps each one onto a distinct exit code.
enum class ErrorKind {
    Validation,  // a value violates a documented invariant
    Range,       // an index is outside its domain
    Shape,       // tensor shapes do not agree
    Numeric,     // non-finite values in a numeric routine
    Io,          // file system or decoding failures
    Config,      // malformed configuration
    Backend,     // denoiser / codec / provider failures
    Registry,    // unknown or duplicate adapter ids
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
    std::ostringstream ss;
    (ss << ... << std::forward<Args>(args));
    return ss.str();
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void raise(ErrorKind kind, Args&&... args) {
    throw Error(kind, detail::concat(std::forward<Args>(args)...));
}

#define SEQEDIT_CHECK(cond, kind, ...)                   \
    do {                                                 \
        if (!(cond)) {                                   \
            ::seqedit::raise(::seqedit::ErrorKind::kind, __VA_ARGS__); \
        }                                                \
    } while (0)

}  // namespace seqedit
