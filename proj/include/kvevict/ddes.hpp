// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "kvevict/attention.hpp"

namespace kvevict {

/**
 * @brief One live KV-cache entry with its cumulative attention score.
 *
 * beta accumulates every attention probability the entry has received since
 * birth and never decreases. A marked entry is still live: it keeps receiving
 * attention and beta updates until the recycle bin is flushed.
 */
struct KVEntry {
    std::size_t original_index = 0;  // position in the post-prefill token ordering
    TokenModality modality = TokenModality::Generated;
    double beta = 0.0;
    bool marked = false;
    std::int64_t birth_step = -1;  // decode step of insertion; -1 = survived prefill
};

/**
 * @brief Recycle-bin eviction parameters.
 *
 * Each decode step marks one lowest-score entry into the bin; once the bin
 * holds k entries they are all flushed at once. The cache may grow at most
 * `buffer` entries above its post-prefill size, which is what 1 < k <= buffer
 * guarantees: the bin always fills before the cache can overflow.
 */
struct DdesConfig {
    std::size_t k = 2;       // bin capacity = entries removed per flush
    std::size_t buffer = 2;  // maximum growth above the post-prefill size
    // Number of most-recent entries exempt from marking. 0 means every
    // unmarked live entry is a candidate, including the one appended this
    // step (whose beta is still 0, so it wins the argmin; protect_recent >= k
    // keeps marking focused on genuinely cold older entries).
    std::size_t protect_recent = 0;

    void validate() const;  // enforces 1 < k <= buffer
};

/// A flushed (or greedily evicted) entry, with its score frozen at eviction.
struct EvictedEntry {
    std::size_t original_index = 0;
    TokenModality modality = TokenModality::Generated;
    double score_at_eviction = 0.0;
    std::int64_t evicted_at_step = 0;
};

/// What one decode step did, in a shape directly serializable to the decode
/// event log: {"step":, "cache_size":, "marked":, "flushed":[...], "loss":}.
struct StepEvent {
    std::int64_t step = 0;
    std::size_t cache_size = 0;                // live entries after the step
    std::optional<std::size_t> marked;         // original index marked this step
    std::vector<std::size_t> flushed;          // original indices removed this step
    double loss = 0.0;                         // score mass evicted this step
};

/**
 * @brief Mutable per-stream decode cache: the live entries, the recycle bin,
 *        and the dynamic size bounds.
 *
 * Single-writer: one decode stream owns one CacheState. The central invariant
 * is prefill_size <= |entries| < prefill_size + buffer between steps.
 */
struct CacheState {
    DdesConfig config;
    std::vector<KVEntry> entries;        // live cache, in insertion order
    std::vector<std::size_t> bin;        // original indices marked, in mark order
    std::size_t prefill_size = 0;        // |entries| right after prefill
    std::int64_t step = 0;               // decode steps executed so far
    std::vector<EvictedEntry> evictions; // every eviction so far, in order

    // Cost-profile instrumentation: how many argmin scans and flushes the
    // decode loop has performed. The eviction protocol implies scans <= steps
    // and flushes == floor(steps / k).
    std::size_t argmin_scans = 0;
    std::size_t flushes = 0;

    CacheState() = default;
    CacheState(DdesConfig cfg, std::vector<KVEntry> initial_entries);
};

/**
 * @brief Adds each entry's attention probability from `row` onto its beta.
 *
 * Row values map to entries by cache order, marked entries included; after T
 * rows every beta equals the column sum of the rows seen since that entry's
 * birth. Throws "row-cache-misalignment" when the row length differs from the
 * live entry count.
 */
void update_scores(CacheState& state, const AttentionRow& row);

/**
 * @brief Executes one full decode step against the recycle-bin policy.
 *
 * In order: (a) update_scores with `row` (covering the live entries before
 * append), (b) append new_entry, (c) mark the unmarked, unprotected live entry
 * with the lowest beta into the bin (ties broken by lowest original index,
 * one mark per step), (d) if the bin now holds k entries, flush them all at
 * once and reset the bin.
 *
 * Throws "buffer-overflow" when the append would breach the size bound on a
 * step whose bin cannot flush, which is unreachable while 1 < k <= buffer
 * holds.
 */
StepEvent step_decode(CacheState& state, const AttentionRow& row, KVEntry new_entry);

/**
 * @brief The k-subset of indices minimizing the score sum: exactly the k
 *        smallest scores, ties broken by lowest index.
 *
 * Throws "insufficient-entries" when k exceeds the score count. Result is
 * sorted ascending by index.
 */
std::vector<std::size_t> select_eviction_set(const std::vector<double>& scores, std::size_t k);

/**
 * @brief One step of the greedy heavy-hitter baseline.
 *
 * After the score update and append, while the cache exceeds `budget` it
 * evicts the single lowest-score entry outside the `recent_window` newest:
 * exactly one eviction per step, chosen by a full sort of the candidate
 * scores (deliberately mirroring the baseline's per-step sorting cost; the
 * recycle-bin loop above only ever does one argmin scan).
 *
 * Throws "invalid-budget" when budget < 1, and "invalid-recent-window" when
 * recent_window > budget.
 */
StepEvent greedy_evict_step(CacheState& state, const AttentionRow& row, KVEntry new_entry,
                            std::size_t budget, std::size_t recent_window);

// Total score mass lost to eviction: the sum of each evicted entry's score at
// the moment it was removed.
double eviction_loss(const std::vector<EvictedEntry>& evicted);

}  // namespace kvevict
