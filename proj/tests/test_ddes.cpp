// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include <cstddef>
#include <vector>

#include <doctest.h>

#include "kvevict/ddes.hpp"
#include "kvevict/metrics.hpp"
#include "kvevict/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using kvevict::CacheState;
using kvevict::DdesConfig;
using kvevict::KVEntry;
using kvevict::StepEvent;
using kvevict::TokenModality;

namespace {

std::vector<KVEntry> entries_with_betas(const std::vector<double>& betas) {
    std::vector<KVEntry> out;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        KVEntry e;
        e.original_index = i;
        e.modality = TokenModality::Visual;
        e.beta = betas[i];
        out.push_back(e);
    }
    return out;
}

DdesConfig make_cfg(std::size_t k, std::size_t buffer, std::size_t protect) {
    DdesConfig cfg;
    cfg.k = k;
    cfg.buffer = buffer;
    cfg.protect_recent = protect;
    return cfg;
}

KVEntry fresh_entry(std::size_t index) {
    KVEntry e;
    e.original_index = index;
    e.modality = TokenModality::Generated;
    return e;
}

// One decode step with an all-zero attention row sized to the live cache.
StepEvent zero_step(CacheState& state, std::size_t new_index) {
    return kvevict::step_decode(
        state, support::make_row(state.entries.size(), std::vector<double>(state.entries.size(), 0.0)),
        fresh_entry(new_index));
}

}  // namespace

TEST_CASE("score update adds each row value onto its entry") {
    CacheState state(make_cfg(2, 4, 0), entries_with_betas({0.1, 0.2}));
    kvevict::update_scores(state, support::make_row(0, {0.6, 0.4}));
    CHECK(state.entries[0].beta == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(state.entries[1].beta == doctest::Approx(0.6).epsilon(1e-15));

    // A uniform row adds 1/n everywhere.
    CacheState uniform(make_cfg(2, 4, 0), entries_with_betas({0.0, 0.0, 0.0, 0.0}));
    kvevict::update_scores(uniform, support::make_row(0, {0.25, 0.25, 0.25, 0.25}));
    for (const KVEntry& e : uniform.entries) {
        CHECK(e.beta == 0.25);
    }
}

TEST_CASE("accumulated scores equal the column sums of the stacked rows") {
    const std::size_t n = 10;
    const kvevict::AttentionMatrix stacked = support::random_matrix(8, n / 2, n - n / 2, 606);
    CacheState state(make_cfg(2, 4, 0), entries_with_betas(std::vector<double>(n, 0.0)));
    for (const kvevict::AttentionRow& row : stacked.rows) {
        kvevict::update_scores(state, row);
    }
    const std::vector<double> reference = kvevict::cumulative_scores(stacked);
    for (std::size_t j = 0; j < n; ++j) {
        CHECK(state.entries[j].beta == reference[j]);  // same accumulation order, bit-equal
    }
}

TEST_CASE("score update rejects misaligned rows") {
    CacheState state(make_cfg(2, 4, 0), entries_with_betas({0.1, 0.2}));
    CHECK(support::thrown_token([&] {
              kvevict::update_scores(state, support::make_row(0, {1.0}));
          }) == "row-cache-misalignment");
}

TEST_CASE("two cold entries are marked then flushed together") {
    // Eight survivors; entries 3 and 7 carry the lowest scores. With k = 2 the
    // first step marks 3 (still live), the second marks 7 and flushes both.
    std::vector<double> betas{1.0, 1.1, 1.2, 0.1, 1.3, 1.4, 1.5, 0.2};
    CacheState state(make_cfg(2, 4, 2), entries_with_betas(betas));

    const StepEvent first = zero_step(state, 8);
    REQUIRE(first.marked.has_value());
    CHECK(*first.marked == 3);
    CHECK(first.flushed.empty());
    CHECK(state.entries.size() == 9);  // marked but not removed

    const StepEvent second = zero_step(state, 9);
    REQUIRE(second.marked.has_value());
    CHECK(*second.marked == 7);
    CHECK(second.flushed == std::vector<std::size_t>{3, 7});
    CHECK(second.loss == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(state.entries.size() == 8);
    CHECK(state.bin.empty());

    for (const KVEntry& e : state.entries) {
        CHECK(e.original_index != 3);
        CHECK(e.original_index != 7);
    }
}

TEST_CASE("cache size oscillates within its bounds at k = buffer = 2") {
    CacheState state(make_cfg(2, 2, 2), entries_with_betas({1.0, 2.0, 3.0, 4.0}));
    std::vector<std::size_t> sizes;
    for (std::size_t s = 0; s < 6; ++s) {
        sizes.push_back(zero_step(state, 4 + s).cache_size);
    }
    CHECK(sizes == std::vector<std::size_t>{5, 4, 5, 4, 5, 4});
}

TEST_CASE("lowest-score entries win the eviction race") {
    // Scores [5, 1, 4, 0.5, 3, 2]: the two flushed entries must be the ones
    // that started at 0.5 and 1.
    CacheState state(make_cfg(2, 2, 2), entries_with_betas({5.0, 1.0, 4.0, 0.5, 3.0, 2.0}));
    zero_step(state, 6);
    zero_step(state, 7);
    REQUIRE(state.evictions.size() == 2);
    // Flushes record entries in cache order: index 1 (score 1) precedes
    // index 3 (score 0.5).
    CHECK(state.evictions[0].original_index == 1);
    CHECK(state.evictions[0].score_at_eviction == 1.0);
    CHECK(state.evictions[1].original_index == 3);
    CHECK(state.evictions[1].score_at_eviction == 0.5);
}

TEST_CASE("with no protected window the newborn entry is the argmin") {
    // A fresh entry starts at score 0, so protect_recent = 0 immediately marks
    // it. This pins the default protocol; runs that want older entries evicted
    // protect at least the bin-sized suffix.
    CacheState state(make_cfg(2, 2, 0), entries_with_betas({1.0, 2.0, 3.0}));
    const StepEvent event = zero_step(state, 3);
    REQUIRE(event.marked.has_value());
    CHECK(*event.marked == 3);
}

TEST_CASE("marked entries keep accumulating attention until the flush") {
    CacheState state(make_cfg(2, 4, 1), entries_with_betas({0.05, 1.0}));
    const StepEvent first = kvevict::step_decode(
        state, support::make_row(0, {0.5, 0.5}), fresh_entry(2));
    REQUIRE(first.marked.has_value());
    CHECK(*first.marked == 0);

    const double beta_when_marked = state.entries[0].beta;
    CHECK(beta_when_marked == doctest::Approx(0.55).epsilon(1e-12));

    // The next positive row still reaches the marked entry.
    const StepEvent second = kvevict::step_decode(
        state, support::make_row(1, {0.2, 0.4, 0.4}), fresh_entry(3));
    CHECK(second.flushed == std::vector<std::size_t>{0, state.evictions[1].original_index});
    CHECK(state.evictions[0].score_at_eviction ==
          doctest::Approx(beta_when_marked + 0.2).epsilon(1e-12));
    CHECK(state.evictions[0].score_at_eviction > beta_when_marked);
}

TEST_CASE("cache constraint holds across seeded random runs") {
    kvevict::rng::Stream master(314159);
    for (int run = 0; run < 25; ++run) {
        const std::size_t buffer = 2 + master.next_u64() % 6;           // D in [2, 7]
        const std::size_t k = 2 + master.next_u64() % (buffer - 1);     // 1 < k <= D
        const std::size_t l = k + master.next_u64() % 12;               // enough candidates
        const std::size_t steps = 20 + master.next_u64() % 30;

        std::vector<double> betas(l);
        for (double& b : betas) {
            b = master.next_canonical() * 5.0;
        }
        CacheState state(make_cfg(k, buffer, k), entries_with_betas(betas));
        kvevict::rng::Stream rows(master.next_u64());

        for (std::size_t s = 0; s < steps; ++s) {
            std::vector<double> row(state.entries.size());
            for (double& v : row) {
                v = rows.next_canonical() * 0.1;
            }
            const StepEvent event =
                kvevict::step_decode(state, support::make_row(s, row), fresh_entry(l + s));

            CHECK(state.entries.size() >= state.prefill_size);
            CHECK(state.entries.size() < state.prefill_size + buffer);
            if (!event.flushed.empty()) {
                CHECK(event.flushed.size() == k);  // atomic flush of exactly k
            }
            CHECK(state.bin.size() < k);
        }
        CHECK(state.flushes == steps / k);
        CHECK(state.argmin_scans == steps);
    }
}

TEST_CASE("eviction set selection is the k smallest with index tie-breaking") {
    CHECK(kvevict::select_eviction_set({3.0, 1.0, 2.0}, 1) == std::vector<std::size_t>{1});
    CHECK(kvevict::select_eviction_set({1.0, 1.0, 5.0}, 2) == std::vector<std::size_t>{0, 1});
    CHECK(support::thrown_token([] { kvevict::select_eviction_set({1.0}, 2); }) ==
          "insufficient-entries");
}

TEST_CASE("eviction set selection matches exhaustive subset enumeration") {
    kvevict::rng::Stream stream(271828);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + stream.next_u64() % 11;  // up to 12
        std::vector<double> scores(n);
        for (double& s : scores) {
            // Coarse grid to provoke ties.
            s = static_cast<double>(stream.next_u64() % 8) * 0.5;
        }
        const std::size_t k = 1 + stream.next_u64() % std::min<std::size_t>(4, n);
        CHECK(kvevict::select_eviction_set(scores, k) ==
              oracles::exhaustive_min_subset(scores, k));
    }
}

TEST_CASE("greedy baseline holds the cache at its budget") {
    CacheState state(make_cfg(2, 2, 0), entries_with_betas({0.4, 0.3, 0.2, 0.1}));

    const StepEvent event = kvevict::greedy_evict_step(
        state, support::make_row(0, {0.0, 0.0, 0.0, 0.0}), fresh_entry(4), 4, 1);
    CHECK(state.entries.size() == 4);
    CHECK(event.flushed.size() == 1);
    // Lowest score outside the newest entry: index 3 at 0.1.
    CHECK(event.flushed[0] == 3);
}

TEST_CASE("greedy with a full-budget recent window degenerates to sliding window") {
    CacheState state(make_cfg(2, 2, 0), entries_with_betas({9.0, 0.1, 8.0}));
    for (std::size_t s = 0; s < 3; ++s) {
        const StepEvent event = kvevict::greedy_evict_step(
            state, support::make_row(s, std::vector<double>(state.entries.size(), 0.0)),
            fresh_entry(3 + s), 3, 3);
        // Oldest entry leaves regardless of score.
        REQUIRE(event.flushed.size() == 1);
        CHECK(event.flushed[0] == s);
    }
}

TEST_CASE("greedy eviction loss matches a per-step replay oracle") {
    kvevict::rng::Stream stream(987654);
    const std::size_t l = 10;
    const std::size_t budget = 10;
    const std::size_t window = 3;
    std::vector<double> betas(l);
    for (double& b : betas) {
        b = stream.next_canonical();
    }

    CacheState state(make_cfg(2, 2, 0), entries_with_betas(betas));
    // Independent replay state: plain index/score lists.
    std::vector<std::size_t> sim_index(l);
    std::vector<double> sim_score = betas;
    for (std::size_t i = 0; i < l; ++i) {
        sim_index[i] = i;
    }
    double sim_loss = 0.0;

    for (std::size_t s = 0; s < 40; ++s) {
        std::vector<double> row(state.entries.size());
        for (double& v : row) {
            v = stream.next_canonical() * 0.05;
        }
        kvevict::greedy_evict_step(state, support::make_row(s, row), fresh_entry(l + s), budget,
                                   window);

        for (std::size_t i = 0; i < sim_score.size(); ++i) {
            sim_score[i] += row[i];
        }
        sim_index.push_back(l + s);
        sim_score.push_back(0.0);
        if (sim_score.size() > budget) {
            std::size_t victim = 0;
            for (std::size_t i = 1; i + window < sim_score.size(); ++i) {
                if (sim_score[i] < sim_score[victim]) {
                    victim = i;
                }
            }
            sim_loss += sim_score[victim];
            sim_score.erase(sim_score.begin() + static_cast<std::ptrdiff_t>(victim));
            sim_index.erase(sim_index.begin() + static_cast<std::ptrdiff_t>(victim));
        }
    }

    CHECK(kvevict::eviction_loss(state.evictions) == doctest::Approx(sim_loss).epsilon(1e-12));
    REQUIRE(state.entries.size() == sim_index.size());
    for (std::size_t i = 0; i < sim_index.size(); ++i) {
        CHECK(state.entries[i].original_index == sim_index[i]);
    }
}

TEST_CASE("greedy baseline contracts") {
    CacheState state(make_cfg(2, 2, 0), entries_with_betas({1.0}));
    CHECK(support::thrown_token([&] {
              kvevict::greedy_evict_step(state, support::make_row(0, {0.0}), fresh_entry(1), 0, 0);
          }) == "invalid-budget");
    CHECK(support::thrown_token([&] {
              kvevict::greedy_evict_step(state, support::make_row(0, {0.0}), fresh_entry(1), 2, 3);
          }) == "invalid-recent-window");
}

TEST_CASE("eviction loss sums scores frozen at eviction time") {
    CHECK(kvevict::eviction_loss({}) == 0.0);
    std::vector<kvevict::EvictedEntry> two(2);
    two[0].score_at_eviction = 0.1;
    two[1].score_at_eviction = 0.2;
    CHECK(kvevict::eviction_loss(two) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("configuration and overflow contracts") {
    CHECK(support::thrown_token([] { make_cfg(1, 4, 0).validate(); }) == "invalid-config");
    CHECK(support::thrown_token([] { make_cfg(5, 4, 0).validate(); }) == "invalid-config");
    CHECK(support::thrown_token([] {
              CacheState(make_cfg(1, 1, 0), entries_with_betas({1.0}));
          }) == "invalid-config");

    // Force an ill-formed configuration past validation to reach the append
    // guard: k = 3 can never flush before a buffer of 1 overflows.
    CacheState broken;
    broken.config = make_cfg(3, 1, 0);
    broken.entries = entries_with_betas({1.0, 2.0});
    broken.prefill_size = 2;
    CHECK(support::thrown_token([&] { zero_step(broken, 2); }) == "buffer-overflow");
}
