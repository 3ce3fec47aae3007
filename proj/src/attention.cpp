// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include "kvevict/attention.hpp"

#include <cmath>
#include <string>

#include "kvevict/check.hpp"

namespace kvevict {

std::string_view to_string(TokenModality m) {
    switch (m) {
    case TokenModality::Visual:
        return "visual";
    case TokenModality::Text:
        return "text";
    case TokenModality::Generated:
        return "generated";
    }
    return "generated";
}

TokenModality modality_from_string(std::string_view name) {
    if (name == "visual") {
        return TokenModality::Visual;
    }
    if (name == "text") {
        return TokenModality::Text;
    }
    if (name == "generated") {
        return TokenModality::Generated;
    }
    KVEVICT_REQUIRE(false, "format-error", "unknown modality \"" + std::string(name) + "\"");
}

std::size_t AttentionMatrix::cell_count() const {
    std::size_t count = 0;
    for (const auto& row : rows) {
        count += row.probs.size();
    }
    return count;
}

void validate_structure(const AttentionMatrix& m) {
    KVEVICT_REQUIRE(m.row_modality.size() == m.rows.size(), "format-error",
                    "row label count " + std::to_string(m.row_modality.size()) +
                        " does not match row count " + std::to_string(m.rows.size()));
    std::size_t previous_step = 0;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        const auto& row = m.rows[i];
        KVEVICT_REQUIRE(row.probs.size() <= m.col_modality.size(), "format-error",
                        "row " + std::to_string(i) + " is longer than the column labels");
        KVEVICT_REQUIRE(i == 0 || row.step > previous_step, "format-error",
                        "row steps must strictly increase (row " + std::to_string(i) + ")");
        previous_step = row.step;
        for (double v : row.probs) {
            KVEVICT_REQUIRE(v >= 0.0 && std::isfinite(v), "format-error",
                            "negative or non-finite attention value in row " + std::to_string(i));
        }
    }
}

bool is_distribution(const AttentionRow& row) {
    double sum = 0.0;
    for (double v : row.probs) {
        if (v < 0.0 || !std::isfinite(v)) {
            return false;
        }
        sum += v;
    }
    return std::fabs(sum - 1.0) <= 1e-9;
}

}  // namespace kvevict
