// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include "kvevict/ddes.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <utility>

#include "kvevict/check.hpp"

namespace kvevict {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Position of the unmarked entry with the lowest beta among the first
// `candidate_end` entries; ties go to the lowest original index.
std::size_t argmin_unmarked(const std::vector<KVEntry>& entries, std::size_t candidate_end) {
    std::size_t best = kNone;
    for (std::size_t i = 0; i < candidate_end; ++i) {
        const KVEntry& e = entries[i];
        if (e.marked) {
            continue;
        }
        if (best == kNone || e.beta < entries[best].beta ||
            (e.beta == entries[best].beta && e.original_index < entries[best].original_index)) {
            best = i;
        }
    }
    return best;
}

}  // namespace

void DdesConfig::validate() const {
    KVEVICT_REQUIRE(k > 1, "invalid-config", "eviction batch size k must be > 1");
    KVEVICT_REQUIRE(k <= buffer, "invalid-config",
                    "k (" + std::to_string(k) + ") must not exceed the buffer (" +
                        std::to_string(buffer) + ")");
}

CacheState::CacheState(DdesConfig cfg, std::vector<KVEntry> initial_entries)
    : config(cfg),
      entries(std::move(initial_entries)) {
    config.validate();
    prefill_size = entries.size();
}

void update_scores(CacheState& state, const AttentionRow& row) {
    KVEVICT_REQUIRE(row.probs.size() == state.entries.size(), "row-cache-misalignment",
                    "row length " + std::to_string(row.probs.size()) +
                        " does not match live entry count " +
                        std::to_string(state.entries.size()));
    for (std::size_t i = 0; i < state.entries.size(); ++i) {
        state.entries[i].beta += row.probs[i];
    }
}

StepEvent step_decode(CacheState& state, const AttentionRow& row, KVEntry new_entry) {
    update_scores(state, row);

    // The append may push the size to prefill_size + buffer for the rest of
    // this step, but only when the flush below immediately takes it back
    // under the bound. Otherwise the configuration is unable to keep the
    // size constraint and the step must refuse.
    const bool flush_pending = state.bin.size() + 1 >= state.config.k;
    KVEVICT_REQUIRE(state.entries.size() + 1 < state.prefill_size + state.config.buffer ||
                        flush_pending,
                    "buffer-overflow",
                    "append would exceed the cache bound with no flush due this step");

    new_entry.marked = false;
    new_entry.birth_step = state.step;
    state.entries.push_back(std::move(new_entry));

    StepEvent event;
    event.step = state.step;

    // One mark per step: lowest cumulative score among unmarked entries
    // outside the protected tail.
    const std::size_t protect = std::min(state.config.protect_recent, state.entries.size());
    const std::size_t candidate_end = state.entries.size() - protect;
    ++state.argmin_scans;
    const std::size_t best = argmin_unmarked(state.entries, candidate_end);
    if (best != kNone) {
        state.entries[best].marked = true;
        state.bin.push_back(state.entries[best].original_index);
        event.marked = state.entries[best].original_index;
    }

    if (state.bin.size() >= state.config.k) {
        ++state.flushes;
        std::vector<KVEntry> kept;
        kept.reserve(state.entries.size() - state.bin.size());
        for (KVEntry& e : state.entries) {
            if (e.marked) {
                event.flushed.push_back(e.original_index);
                event.loss += e.beta;
                state.evictions.push_back({e.original_index, e.modality, e.beta, state.step});
            } else {
                kept.push_back(std::move(e));
            }
        }
        state.entries.swap(kept);
        state.bin.clear();
    }

    KVEVICT_REQUIRE(state.entries.size() < state.prefill_size + state.config.buffer,
                    "buffer-overflow", "cache bound violated after the step");

    ++state.step;
    event.cache_size = state.entries.size();
    return event;
}

std::vector<std::size_t> select_eviction_set(const std::vector<double>& scores, std::size_t k) {
    KVEVICT_REQUIRE(k <= scores.size(), "insufficient-entries",
                    "k=" + std::to_string(k) + " exceeds the " + std::to_string(scores.size()) +
                        " available scores");
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return scores[a] < scores[b];
        }
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

StepEvent greedy_evict_step(CacheState& state, const AttentionRow& row, KVEntry new_entry,
                            std::size_t budget, std::size_t recent_window) {
    KVEVICT_REQUIRE(budget >= 1, "invalid-budget", "budget must be >= 1");
    KVEVICT_REQUIRE(recent_window <= budget, "invalid-recent-window",
                    "recent_window must not exceed the budget");

    update_scores(state, row);
    new_entry.marked = false;
    new_entry.birth_step = state.step;
    state.entries.push_back(std::move(new_entry));

    StepEvent event;
    event.step = state.step;

    if (state.entries.size() > budget) {
        const std::size_t protect = std::min(recent_window, state.entries.size());
        const std::size_t candidate_end = state.entries.size() - protect;
        // Deliberate full sort of the candidate scores every step: this
        // baseline models the evictor that re-ranks the whole cache per
        // token, which is what the recycle-bin loop avoids.
        std::vector<std::size_t> order(candidate_end);
        for (std::size_t i = 0; i < candidate_end; ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const KVEntry& ea = state.entries[a];
            const KVEntry& eb = state.entries[b];
            if (ea.beta != eb.beta) {
                return ea.beta < eb.beta;
            }
            return ea.original_index < eb.original_index;
        });
        if (!order.empty()) {
            const std::size_t victim = order.front();
            const KVEntry& e = state.entries[victim];
            state.evictions.push_back({e.original_index, e.modality, e.beta, state.step});
            event.flushed.push_back(e.original_index);
            event.loss = e.beta;
            state.entries.erase(state.entries.begin() + static_cast<std::ptrdiff_t>(victim));
        }
    }

    ++state.step;
    event.cache_size = state.entries.size();
    return event;
}

double eviction_loss(const std::vector<EvictedEntry>& evicted) {
    double total = 0.0;
    for (const EvictedEntry& e : evicted) {
        total += e.score_at_eviction;
    }
    return total;
}

}  // namespace kvevict
