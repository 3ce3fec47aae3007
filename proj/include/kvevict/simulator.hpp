// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kvevict/attention.hpp"
#include "kvevict/dap.hpp"
#include "kvevict/ddes.hpp"

namespace kvevict {

/**
 * @brief Two-point location mixture of normals, the salience law for one
 *        modality: with probability heavy_prob a token's salience centers at
 *        heavy_loc, otherwise at base_loc, with common spread sigma.
 *
 * heavy_prob = 0 degenerates to a plain normal. The visual default keeps most
 * tokens far below the text baseline with a thin heavy tail, which is what
 * makes visual attention collapse below the sparsity threshold after softmax
 * while text attention does not.
 */
struct SalienceDist {
    double heavy_prob = 0.0;
    double heavy_loc = 0.0;
    double base_loc = 0.0;
    double sigma = 1.0;

    // Throws "invalid-config" on heavy_prob outside [0,1] or sigma < 0.
    void validate() const;
};

/**
 * @brief Everything needed to synthesize one deterministic attention stream:
 *        prompt shape, layer count, decode length, salience laws, cross-layer
 *        correlation, and the seed.
 */
struct StreamConfig {
    std::size_t n_visual = 128;
    std::size_t n_text = 32;
    std::size_t n_layers = 4;
    std::size_t decode_steps = 64;
    std::size_t head_dim = 16;  // logits are scaled by 1/sqrt(head_dim)

    SalienceDist visual_salience{0.10, 12.0, -20.0, 1.0};
    SalienceDist text_salience{0.0, 0.0, 8.0, 1.5};

    // Cross-layer salience correlation: layer L's salience for token j is
    // rho * (layer-1 salience) + (1-rho) * (a fresh layer-L draw). Per-cell
    // noise is shared across layers, so rho = 1 makes every layer's attention
    // stream identical to layer 1's, not just its salience.
    double rho = 1.0;

    std::uint64_t seed = 42;

    std::size_t context_length() const {
        return n_visual + n_text;
    }

    std::size_t total_tokens() const {
        return context_length() + decode_steps;
    }

    // Throws "invalid-config" on zero token counts, head_dim < 1, rho outside
    // [0,1], or invalid salience parameters.
    void validate() const;
};

/**
 * @brief A fully reproducible synthetic attention stream.
 *
 * Prefill matrices are materialized per layer. Decode rows are synthesized on
 * demand from the per-key salience tables: decode_row(layer, step, live)
 * softmaxes the live keys' logits directly, which is exactly the distribution
 * obtained by restricting the full row to the live set and renormalizing.
 * That keeps a policy run O(live entries) per step regardless of how long the
 * trace is.
 */
class GeneratedTrace {
public:
    GeneratedTrace() = default;
    GeneratedTrace(StreamConfig cfg, std::vector<TokenModality> modalities,
                   std::vector<AttentionMatrix> prefill,
                   std::vector<std::vector<double>> key_salience);

    const StreamConfig& config() const {
        return m_config;
    }

    std::uint64_t seed() const {
        return m_config.seed;
    }

    const std::vector<TokenModality>& modalities() const {
        return m_modalities;
    }

    const AttentionMatrix& prefill(std::size_t layer) const;

    std::size_t layer_count() const {
        return m_prefill.size();
    }

    // Salience of every key (prompt + generated) at one layer; index = token.
    const std::vector<double>& key_salience(std::size_t layer) const;

    // Decode row for `step`, over all keys older than the query (full cache).
    AttentionRow decode_row(std::size_t layer, std::size_t step) const;

    // Decode row restricted to the given live keys (ascending original
    // indices): softmax over exactly those logits.
    AttentionRow decode_row(std::size_t layer, std::size_t step,
                            const std::vector<std::size_t>& live_keys) const;

    // Prefill rows followed by all full-cache decode rows, as one ragged
    // matrix. Materializes everything; meant for export and analysis, not for
    // policy runs.
    AttentionMatrix full_matrix(std::size_t layer) const;

private:
    StreamConfig m_config;
    std::vector<TokenModality> m_modalities;
    std::vector<AttentionMatrix> m_prefill;
    std::vector<std::vector<double>> m_salience;  // [layer][key]
};

// Synthesizes the trace for `cfg` (parallel across layers; every value is a
// pure function of the seed, so the result is identical at any thread count).
// Throws "invalid-config" on invalid parameters.
GeneratedTrace generate_trace(const StreamConfig& cfg);

/// Eviction policies the runner can drive over a trace.
enum class Policy { Full, Hae, Greedy, Window };

std::string_view to_string(Policy p);
Policy policy_from_string(std::string_view name);

/// Budget parameters for the greedy and sliding-window baselines.
struct GreedyConfig {
    std::size_t budget = 0;         // live entries allowed after each step
    std::size_t recent_window = 0;  // newest entries exempt from eviction
};

/**
 * @brief Everything run_policy needs besides the trace: prefill pruning
 *        parameters, optional decode eviction, baseline budgets, and the
 *        cache-size modeling constant.
 */
struct PolicyConfig {
    DapConfig dap;                   // hae only
    std::optional<DdesConfig> ddes;  // hae only; absent = decode eviction off
    GreedyConfig greedy;             // greedy/window only
    std::size_t bytes_per_entry = 4096;

    // When set, every decode step of every layer appends one JSON line to
    // this stream (the decode event log).
    std::ostream* event_log = nullptr;
};

/**
 * @brief One policy run's outcome in report shape.
 *
 * Counts are summed over layers, so retained_entries + evicted_entries equals
 * layers x tokens processed. overlap_rates is filled for hae only (one value
 * per layer). wall_ms is the only non-deterministic field; reports zero it
 * unless timing is explicitly requested.
 */
struct MetricsRecord {
    std::string policy;
    std::uint64_t seed = 0;
    std::size_t retained_entries = 0;
    std::size_t evicted_entries = 0;
    std::size_t cache_bytes = 0;
    double eviction_loss = 0.0;
    std::vector<double> overlap_rates;
    double wall_ms = 0.0;
};

// Mean of overlap_rates, or an empty optional when none were recorded.
std::optional<double> overlap_mean(const MetricsRecord& record);

/**
 * @brief Drives one eviction policy over every layer of a trace.
 *
 * hae prunes visual entries on the layer-1 prefill matrix, broadcasts the
 * decision to all layers, then (if configured) runs recycle-bin eviction per
 * layer; greedy/window run their baseline evictor; full only accumulates.
 * Per-layer caches start with beta equal to that layer's prefill column sums,
 * and every decode row is the softmax over the live keys.
 *
 * Throws "config-mismatch" when the config does not fit the policy (e.g. a
 * zero budget for greedy) and propagates invalid-config contract errors.
 */
MetricsRecord run_policy(const GeneratedTrace& trace, Policy policy, const PolicyConfig& cfg);

}  // namespace kvevict
