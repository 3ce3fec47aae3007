// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include "kvevict/dap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kvevict/check.hpp"

namespace kvevict {

namespace {

std::vector<std::size_t> visual_columns(const AttentionMatrix& m) {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < m.column_count(); ++j) {
        if (m.col_modality[j] == TokenModality::Visual) {
            cols.push_back(j);
        }
    }
    return cols;
}

bool has_text_row(const AttentionMatrix& m) {
    for (TokenModality mod : m.row_modality) {
        if (mod == TokenModality::Text) {
            return true;
        }
    }
    return false;
}

}  // namespace

void DapConfig::validate(std::size_t n_visual) const {
    KVEVICT_REQUIRE(r >= 0.0 && std::isfinite(r), "invalid-config", "r must be >= 0");
    KVEVICT_REQUIRE(alpha >= 0.0 && std::isfinite(alpha), "invalid-config", "alpha must be >= 0");
    if (max_evict.has_value()) {
        KVEVICT_REQUIRE(*max_evict >= 1 && *max_evict <= n_visual, "invalid-config",
                        "max_evict must be in [1, visual token count]");
    }
}

std::vector<double> global_text_attention(const AttentionMatrix& m) {
    KVEVICT_REQUIRE(m.row_modality.size() == m.rows.size(), "format-error",
                    "row label count does not match row count");
    const auto cols = visual_columns(m);
    KVEVICT_REQUIRE(!cols.empty(), "no-visual-tokens", "matrix has no visual columns");
    KVEVICT_REQUIRE(has_text_row(m), "no-text-context", "matrix has no text rows");

    std::vector<double> sums(cols.size(), 0.0);
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        if (m.row_modality[i] != TokenModality::Text) {
            continue;
        }
        const auto& probs = m.rows[i].probs;
        for (std::size_t v = 0; v < cols.size(); ++v) {
            if (cols[v] < probs.size()) {
                sums[v] += probs[cols[v]];
            }
        }
    }
    return sums;
}

std::vector<std::size_t> select_retained(const std::vector<double>& global_attention, double r) {
    KVEVICT_REQUIRE(!global_attention.empty(), "no-visual-tokens",
                    "global attention vector is empty");
    double total = 0.0;
    for (double a : global_attention) {
        KVEVICT_REQUIRE(a >= 0.0, "invalid-config", "global attention values must be >= 0");
        total += a;
    }
    const double cutoff = r * total;
    std::vector<std::size_t> retained;
    for (std::size_t j = 0; j < global_attention.size(); ++j) {
        if (global_attention[j] >= cutoff) {
            retained.push_back(j);
        }
    }
    return retained;
}

bool max_attention_guard(const AttentionMatrix& m, std::size_t visual_column, double alpha) {
    KVEVICT_REQUIRE(visual_column < m.column_count() &&
                        m.col_modality[visual_column] == TokenModality::Visual,
                    "no-visual-tokens",
                    "candidate " + std::to_string(visual_column) + " is not a visual column");
    bool any = false;
    double column_max = 0.0;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        if (m.row_modality[i] != TokenModality::Text) {
            continue;
        }
        if (visual_column < m.rows[i].probs.size()) {
            column_max = std::max(column_max, m.rows[i].probs[visual_column]);
            any = true;
        }
    }
    // No text evidence means no license to evict.
    return any && column_max < alpha;
}

PruneDecision prune_prefill(const AttentionMatrix& m, const DapConfig& cfg) {
    const auto cols = visual_columns(m);
    KVEVICT_REQUIRE(!cols.empty(), "no-visual-tokens", "matrix has no visual columns");
    cfg.validate(cols.size());

    const std::vector<double> attention = global_text_attention(m);
    const std::vector<std::size_t> retained_ordinals = select_retained(attention, cfg.r);

    std::vector<bool> is_retained(cols.size(), true);
    {
        std::vector<bool> passes(cols.size(), false);
        for (std::size_t ordinal : retained_ordinals) {
            passes[ordinal] = true;
        }
        for (std::size_t v = 0; v < cols.size(); ++v) {
            // Evict only when the global threshold fails AND the per-token
            // guard confirms no text token leans on this entry.
            if (!passes[v] && max_attention_guard(m, cols[v], cfg.alpha)) {
                is_retained[v] = false;
            }
        }
    }

    std::vector<std::size_t> candidates;
    for (std::size_t v = 0; v < cols.size(); ++v) {
        if (!is_retained[v]) {
            candidates.push_back(v);
        }
    }

    // Cap enforcement: keep the lowest-attention candidates, stop at c-1 so
    // the evicted count stays strictly below the cap.
    if (cfg.max_evict.has_value() && candidates.size() >= *cfg.max_evict) {
        std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
            if (attention[a] != attention[b]) {
                return attention[a] < attention[b];
            }
            return a < b;
        });
        const std::size_t keep = *cfg.max_evict - 1;
        for (std::size_t v = keep; v < candidates.size(); ++v) {
            is_retained[candidates[v]] = true;
        }
    }

    PruneDecision decision;
    decision.layer_origin = 0;
    for (std::size_t v = 0; v < cols.size(); ++v) {
        if (is_retained[v]) {
            decision.retained.push_back(cols[v]);
        } else {
            decision.evicted.push_back(cols[v]);
        }
    }
    return decision;
}

std::vector<std::vector<std::size_t>> broadcast(const PruneDecision& decision,
                                                std::size_t layer_count) {
    KVEVICT_REQUIRE(layer_count >= 1, "invalid-config", "layer_count must be >= 1");
    return std::vector<std::vector<std::size_t>>(layer_count, decision.evicted);
}

std::vector<double> overlap_rate(const std::vector<std::size_t>& layer1_evicted,
                                 const std::vector<std::vector<std::size_t>>& per_layer_evictable) {
    KVEVICT_REQUIRE(!layer1_evicted.empty(), "undefined-overlap",
                    "layer-1 evicted set is empty; overlap is undefined");
    std::vector<std::size_t> origin = layer1_evicted;
    std::sort(origin.begin(), origin.end());

    std::vector<double> rates;
    rates.reserve(per_layer_evictable.size());
    for (const auto& layer : per_layer_evictable) {
        std::vector<std::size_t> sorted_layer = layer;
        std::sort(sorted_layer.begin(), sorted_layer.end());
        std::vector<std::size_t> common;
        std::set_intersection(origin.begin(), origin.end(), sorted_layer.begin(),
                              sorted_layer.end(), std::back_inserter(common));
        rates.push_back(static_cast<double>(common.size()) / static_cast<double>(origin.size()));
    }
    return rates;
}

}  // namespace kvevict
