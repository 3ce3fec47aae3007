// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace kvevict {

/// Origin of a cached token. Generated marks tokens appended during decode.
enum class TokenModality { Visual, Text, Generated };

std::string_view to_string(TokenModality m);

// Inverse of to_string; throws contract_error("format-error") on unknown names.
TokenModality modality_from_string(std::string_view name);

/**
 * @brief One attention distribution: the probabilities a single query step
 *        places over the live cache entries, in cache order.
 *
 * A well-formed row is non-negative and sums to 1 within 1e-9 (post-softmax);
 * see is_distribution(). Operations that only need raw scores do not enforce
 * the sum so that synthetic corner cases stay expressible.
 */
struct AttentionRow {
    std::size_t step = 0;
    std::vector<double> probs;
};

/**
 * @brief Ragged causal attention matrix with per-row and per-column modality
 *        labels.
 *
 * Row t may be shorter than the full column count: cells a column would only
 * gain after row t's step are structurally absent, not zero, and never
 * contribute to counts or sums.
 */
struct AttentionMatrix {
    std::vector<AttentionRow> rows;
    std::vector<TokenModality> row_modality;  // per row, the query token's modality
    std::vector<TokenModality> col_modality;  // per column, the key token's modality

    std::size_t column_count() const {
        return col_modality.size();
    }

    bool empty() const {
        return rows.empty();
    }

    // Number of present (non-absent) cells across all rows.
    std::size_t cell_count() const;
};

// Structural validation: label counts match the shape, rows fit within the
// column range, steps strictly increase, all values are non-negative.
// Throws contract_error on the first violation.
void validate_structure(const AttentionMatrix& m);

// True iff the row is non-negative and sums to 1 within 1e-9.
bool is_distribution(const AttentionRow& row);

}  // namespace kvevict
