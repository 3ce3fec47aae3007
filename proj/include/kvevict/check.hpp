// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace kvevict {

/**
 * @brief Thrown when an operation's input violates its contract.
 *
 * The message always starts with a stable lowercase token (e.g. "empty-matrix",
 * "row-cache-misalignment") that callers and tests can match on, optionally
 * followed by ": " and a human-readable detail.
 */
class contract_error : public std::invalid_argument {
public:
    explicit contract_error(const std::string& message) : std::invalid_argument(message) {}
};

namespace detail {

[[noreturn]] inline void throw_contract_error(const char* token, const std::string& detail) {
    if (detail.empty()) {
        throw contract_error(token);
    }
    throw contract_error(std::string(token) + ": " + detail);
}

}  // namespace detail
}  // namespace kvevict

// Validates an input contract. On failure throws kvevict::contract_error whose
// message starts with the given stable token.
#define KVEVICT_REQUIRE(condition, token, detail_text)                        \
    do {                                                                      \
        if (!(condition)) {                                                   \
            ::kvevict::detail::throw_contract_error((token), (detail_text));  \
        }                                                                     \
    } while (0)
