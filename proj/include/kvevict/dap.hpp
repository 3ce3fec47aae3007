// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "kvevict/attention.hpp"

namespace kvevict {

/**
 * @brief Configuration for prefill-stage dual-attention pruning.
 *
 * A visual entry is evicted only when it fails both tests: its global text
 * attention falls below the r-fraction of the total (boundary retains), AND
 * its maximum attention from any single text token is strictly below alpha.
 * The second test can only rescue entries, never add evictions.
 */
struct DapConfig {
    // Fraction of total visual attention mass below which an entry becomes an
    // eviction candidate. r = 0 disables pruning entirely.
    double r = 0.0;

    // Per-entry ceiling: a candidate is evictable only while every text token
    // attends to it strictly below alpha.
    double alpha = 0.0;

    // Optional hard cap: strictly fewer than max_evict entries are evicted.
    std::optional<std::size_t> max_evict;

    // Throws contract_error on r < 0, alpha < 0, or max_evict > n_visual.
    void validate(std::size_t n_visual) const;
};

/**
 * @brief Outcome of prefill pruning at the origin layer.
 *
 * retained and evicted partition the visual column indices; both are sorted
 * ascending. The decision is computed once (layer_origin) and reused verbatim
 * on every other layer.
 */
struct PruneDecision {
    std::vector<std::size_t> retained;
    std::vector<std::size_t> evicted;
    std::size_t layer_origin = 0;
};

/**
 * @brief Sums attention from all text rows onto each visual column.
 *
 * Result is indexed by visual-column ordinal (ascending column order). Cells a
 * text row does not reach are structurally absent and contribute nothing.
 * Throws "no-text-context" when the matrix has no text rows and
 * "no-visual-tokens" when it has no visual columns.
 */
std::vector<double> global_text_attention(const AttentionMatrix& m);

/**
 * @brief Applies the retention threshold: ordinal j is retained iff
 *        A[j] >= r * sum(A). Boundary equality retains.
 *
 * Scale-invariant: multiplying all of A by a positive constant cannot change
 * the outcome. Throws on empty A or negative entries.
 */
std::vector<std::size_t> select_retained(const std::vector<double>& global_attention, double r);

/**
 * @brief True iff every text token attends to the candidate visual column
 *        strictly below alpha (true = evictable).
 *
 * With no text evidence at all the guard conservatively returns false.
 * @param visual_column original column index of the candidate
 */
bool max_attention_guard(const AttentionMatrix& m, std::size_t visual_column, double alpha);

/**
 * @brief Full prefill decision: evict the visual entries that fail the
 *        retention threshold AND pass the evictability guard.
 *
 * When a cap c is configured and the conjunction yields >= c candidates, only
 * the c-1 candidates with the lowest global attention are evicted (ties broken
 * by lowest column index), so |evicted| < c always holds.
 * Throws "no-visual-tokens" / "no-text-context" on degenerate inputs.
 */
PruneDecision prune_prefill(const AttentionMatrix& m, const DapConfig& cfg);

// One identical copy of the evicted-index set per layer; no per-layer
// recomputation. layer_count must be >= 1.
std::vector<std::vector<std::size_t>> broadcast(const PruneDecision& decision,
                                                std::size_t layer_count);

/**
 * @brief Fraction of the origin layer's evicted set that each other layer
 *        would also evict: |layer1 ∩ evictable_L| / |layer1| per layer.
 *
 * Analysis-only; the fast path never recomputes per-layer decisions. Throws
 * "undefined-overlap" when layer1_evicted is empty.
 */
std::vector<double> overlap_rate(const std::vector<std::size_t>& layer1_evicted,
                                 const std::vector<std::vector<std::size_t>>& per_layer_evictable);

}  // namespace kvevict
