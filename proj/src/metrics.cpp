// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include "kvevict/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kvevict/check.hpp"

// Kernel layout: the OpenMP versions parallelize only across independent
// outputs (rows for counting, columns for score sums) and keep the per-output
// accumulation order identical to the serial reference, so both paths return
// bit-identical results at any thread count. Counts are integers and commute
// exactly; column sums run in ascending row order inside each column.

namespace kvevict {

namespace {

void check_shape(const AttentionMatrix& m) {
    KVEVICT_REQUIRE(!m.rows.empty(), "empty-matrix", "attention matrix has no rows");
    for (const auto& row : m.rows) {
        KVEVICT_REQUIRE(row.probs.size() <= m.col_modality.size(), "format-error",
                        "row longer than the column labels");
    }
}

void check_threshold(double threshold) {
    KVEVICT_REQUIRE(threshold >= 0.0, "invalid-threshold",
                    "sparsity threshold must be non-negative");
}

struct ModalityCounts {
    std::int64_t below_visual = 0, total_visual = 0;
    std::int64_t below_text = 0, total_text = 0;
    std::int64_t below_other = 0, total_other = 0;

    std::int64_t below_all() const {
        return below_visual + below_text + below_other;
    }
    std::int64_t total_all() const {
        return total_visual + total_text + total_other;
    }
};

ModalityCounts count_serial(const AttentionMatrix& m, double threshold) {
    ModalityCounts c;
    for (const auto& row : m.rows) {
        for (std::size_t j = 0; j < row.probs.size(); ++j) {
            const bool below = row.probs[j] <= threshold;
            switch (m.col_modality[j]) {
            case TokenModality::Visual:
                ++c.total_visual;
                c.below_visual += below;
                break;
            case TokenModality::Text:
                ++c.total_text;
                c.below_text += below;
                break;
            case TokenModality::Generated:
                ++c.total_other;
                c.below_other += below;
                break;
            }
        }
    }
    return c;
}

ModalityCounts count_parallel(const AttentionMatrix& m, double threshold) {
    std::int64_t bv = 0, tv = 0, bt = 0, tt = 0, bo = 0, to = 0;
    const std::int64_t n_rows = static_cast<std::int64_t>(m.rows.size());
#pragma omp parallel for reduction(+ : bv, tv, bt, tt, bo, to) schedule(static)
    for (std::int64_t i = 0; i < n_rows; ++i) {
        const auto& row = m.rows[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < row.probs.size(); ++j) {
            const bool below = row.probs[j] <= threshold;
            switch (m.col_modality[j]) {
            case TokenModality::Visual:
                ++tv;
                bv += below;
                break;
            case TokenModality::Text:
                ++tt;
                bt += below;
                break;
            case TokenModality::Generated:
                ++to;
                bo += below;
                break;
            }
        }
    }
    ModalityCounts c;
    c.below_visual = bv;
    c.total_visual = tv;
    c.below_text = bt;
    c.total_text = tt;
    c.below_other = bo;
    c.total_other = to;
    return c;
}

ModalitySparsity sparsity_from_counts(const ModalityCounts& c) {
    ModalitySparsity s;
    s.overall = static_cast<double>(c.below_all()) / static_cast<double>(c.total_all());
    if (c.total_visual > 0) {
        s.visual = static_cast<double>(c.below_visual) / static_cast<double>(c.total_visual);
    }
    if (c.total_text > 0) {
        s.text = static_cast<double>(c.below_text) / static_cast<double>(c.total_text);
    }
    return s;
}

std::vector<double> column_sums_serial(const AttentionMatrix& m) {
    std::vector<double> sums(m.column_count(), 0.0);
    for (const auto& row : m.rows) {
        for (std::size_t j = 0; j < row.probs.size(); ++j) {
            sums[j] += row.probs[j];
        }
    }
    return sums;
}

std::vector<double> column_sums_parallel(const AttentionMatrix& m) {
    std::vector<double> sums(m.column_count(), 0.0);
    const std::size_t n_cols = m.column_count();
#pragma omp parallel
    {
#ifdef _OPENMP
        const auto n_threads = static_cast<std::size_t>(omp_get_num_threads());
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
#else
        const std::size_t n_threads = 1;
        const std::size_t tid = 0;
#endif
        // Each thread owns a contiguous column slice but walks the rows in
        // storage order, so every column is still summed in ascending row
        // order (bit-identical to the serial reference) while each row read
        // stays contiguous.
        const std::size_t lo = n_cols * tid / n_threads;
        const std::size_t hi = n_cols * (tid + 1) / n_threads;
        for (const auto& row : m.rows) {
            const std::size_t end = std::min(hi, row.probs.size());
            for (std::size_t j = lo; j < end; ++j) {
                sums[j] += row.probs[j];
            }
        }
    }
    return sums;
}

}  // namespace

double sparsity_rate(const AttentionMatrix& m, double threshold) {
    check_shape(m);
    check_threshold(threshold);
    const ModalityCounts c = count_parallel(m, threshold);
    KVEVICT_REQUIRE(c.total_all() > 0, "empty-matrix", "attention matrix has no cells");
    return static_cast<double>(c.below_all()) / static_cast<double>(c.total_all());
}

ModalitySparsity modality_sparsity(const AttentionMatrix& m, double threshold) {
    check_shape(m);
    check_threshold(threshold);
    const ModalityCounts c = count_parallel(m, threshold);
    KVEVICT_REQUIRE(c.total_all() > 0, "empty-matrix", "attention matrix has no cells");
    return sparsity_from_counts(c);
}

std::vector<double> cumulative_scores(const AttentionMatrix& m) {
    for (const auto& row : m.rows) {
        KVEVICT_REQUIRE(row.probs.size() <= m.col_modality.size(), "format-error",
                        "row longer than the column labels");
    }
    return column_sums_parallel(m);
}

ModalityVariance modality_variance(const std::vector<double>& scores,
                                   const std::vector<TokenModality>& modalities) {
    KVEVICT_REQUIRE(scores.size() == modalities.size(), "length-mismatch",
                    "scores and modality labels must have equal length");

    // Welford's update per modality; the tests check against an independent
    // two-pass computation.
    struct Welford {
        std::size_t n = 0;
        double mean = 0.0;
        double m2 = 0.0;
        void push(double v) {
            ++n;
            const double delta = v - mean;
            mean += delta / static_cast<double>(n);
            m2 += delta * (v - mean);
        }
        double variance() const {
            return m2 / static_cast<double>(n);
        }
    };

    Welford visual, text;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (modalities[i] == TokenModality::Visual) {
            visual.push(scores[i]);
        } else if (modalities[i] == TokenModality::Text) {
            text.push(scores[i]);
        }
    }

    ModalityVariance result;
    if (visual.n > 0) {
        result.visual = visual.variance();
    }
    if (text.n > 0) {
        result.text = text.variance();
    }
    return result;
}

namespace serial {

double sparsity_rate(const AttentionMatrix& m, double threshold) {
    check_shape(m);
    check_threshold(threshold);
    const ModalityCounts c = count_serial(m, threshold);
    KVEVICT_REQUIRE(c.total_all() > 0, "empty-matrix", "attention matrix has no cells");
    return static_cast<double>(c.below_all()) / static_cast<double>(c.total_all());
}

ModalitySparsity modality_sparsity(const AttentionMatrix& m, double threshold) {
    check_shape(m);
    check_threshold(threshold);
    const ModalityCounts c = count_serial(m, threshold);
    KVEVICT_REQUIRE(c.total_all() > 0, "empty-matrix", "attention matrix has no cells");
    return sparsity_from_counts(c);
}

std::vector<double> cumulative_scores(const AttentionMatrix& m) {
    for (const auto& row : m.rows) {
        KVEVICT_REQUIRE(row.probs.size() <= m.col_modality.size(), "format-error",
                        "row longer than the column labels");
    }
    return column_sums_serial(m);
}

}  // namespace serial
}  // namespace kvevict
