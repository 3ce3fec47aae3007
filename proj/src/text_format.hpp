// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <system_error>

#include "kvevict/check.hpp"

namespace kvevict::detail {

/// Shortest decimal form that round-trips the exact double, locale-free.
inline std::string format_double(double value) {
    char buf[64];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), value);
    KVEVICT_REQUIRE(res.ec == std::errc(), "format-error", "double rendering failed");
    return std::string(buf, res.ptr);
}

inline std::string format_uint(std::uint64_t value) {
    char buf[24];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), value);
    KVEVICT_REQUIRE(res.ec == std::errc(), "format-error", "integer rendering failed");
    return std::string(buf, res.ptr);
}

inline std::string format_int(std::int64_t value) {
    char buf[24];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), value);
    KVEVICT_REQUIRE(res.ec == std::errc(), "format-error", "integer rendering failed");
    return std::string(buf, res.ptr);
}

}  // namespace kvevict::detail
