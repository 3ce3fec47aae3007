// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include "kvevict/simulator.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <utility>

#include "kvevict/check.hpp"
#include "kvevict/metrics.hpp"
#include "kvevict/rng.hpp"
#include "kvevict/trace_io.hpp"

namespace kvevict {

namespace {

// Stream-purpose tags folded into the master seed so salience and noise never
// share a subsequence.
constexpr std::uint64_t kSalienceTag = 0x53414c49454e4345ULL;  // "SALIENCE"
constexpr std::uint64_t kNoiseTag = 0x4e4f495345303031ULL;     // "NOISE001"

double draw_salience(const SalienceDist& dist, rng::Stream& stream) {
    const double u = stream.next_canonical();
    const double loc = (u <= dist.heavy_prob) ? dist.heavy_loc : dist.base_loc;
    return loc + dist.sigma * stream.next_gaussian();
}

// Noise is shared across layers on purpose: cross-layer variation comes only
// from the salience mixing, so at rho = 1 every layer emits the exact same
// attention stream and a broadcast eviction decision is lossless.
std::uint64_t noise_base(std::uint64_t seed, std::size_t query) {
    const std::uint64_t h = rng::hash_combine(seed, kNoiseTag);
    return rng::hash_combine(h, static_cast<std::uint64_t>(query));
}

// Counter-based per-cell noise: depends only on (seed, query, key), so any
// subset of a row reproduces the full row's values exactly.
double noise_at(std::uint64_t query_base, std::size_t key) {
    return rng::gaussian_from_hash(rng::hash_combine(query_base, static_cast<std::uint64_t>(key)));
}

}  // namespace

void SalienceDist::validate() const {
    KVEVICT_REQUIRE(heavy_prob >= 0.0 && heavy_prob <= 1.0, "invalid-config",
                    "heavy_prob must lie in [0, 1]");
    KVEVICT_REQUIRE(sigma >= 0.0 && std::isfinite(sigma), "invalid-config",
                    "sigma must be >= 0");
    KVEVICT_REQUIRE(std::isfinite(heavy_loc) && std::isfinite(base_loc), "invalid-config",
                    "salience locations must be finite");
}

void StreamConfig::validate() const {
    KVEVICT_REQUIRE(n_visual >= 1, "invalid-config", "n_visual must be >= 1");
    KVEVICT_REQUIRE(n_text >= 1, "invalid-config", "n_text must be >= 1");
    KVEVICT_REQUIRE(n_layers >= 1, "invalid-config", "n_layers must be >= 1");
    KVEVICT_REQUIRE(head_dim >= 1, "invalid-config", "head_dim must be >= 1");
    KVEVICT_REQUIRE(rho >= 0.0 && rho <= 1.0, "invalid-config", "rho must lie in [0, 1]");
    visual_salience.validate();
    text_salience.validate();
}

GeneratedTrace::GeneratedTrace(StreamConfig cfg, std::vector<TokenModality> modalities,
                               std::vector<AttentionMatrix> prefill,
                               std::vector<std::vector<double>> key_salience)
    : m_config(std::move(cfg)),
      m_modalities(std::move(modalities)),
      m_prefill(std::move(prefill)),
      m_salience(std::move(key_salience)) {}

const AttentionMatrix& GeneratedTrace::prefill(std::size_t layer) const {
    KVEVICT_REQUIRE(layer < m_prefill.size(), "invalid-config",
                    "layer " + std::to_string(layer) + " out of range");
    return m_prefill[layer];
}

const std::vector<double>& GeneratedTrace::key_salience(std::size_t layer) const {
    KVEVICT_REQUIRE(layer < m_salience.size(), "invalid-config",
                    "layer " + std::to_string(layer) + " out of range");
    return m_salience[layer];
}

AttentionRow GeneratedTrace::decode_row(std::size_t layer, std::size_t step,
                                        const std::vector<std::size_t>& live_keys) const {
    KVEVICT_REQUIRE(layer < m_salience.size(), "invalid-config", "layer out of range");
    KVEVICT_REQUIRE(step < m_config.decode_steps, "invalid-config", "decode step out of range");

    const std::size_t query = m_config.context_length() + step;
    const std::vector<double>& salience = m_salience[layer];
    const double scale = 1.0 / std::sqrt(static_cast<double>(m_config.head_dim));
    const std::uint64_t query_base = noise_base(m_config.seed, query);

    AttentionRow row;
    row.step = query;
    row.probs.resize(live_keys.size());

    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < live_keys.size(); ++i) {
        const std::size_t key = live_keys[i];
        KVEVICT_REQUIRE(key < query, "invalid-config",
                        "live key " + std::to_string(key) + " is not older than the query");
        KVEVICT_REQUIRE(i == 0 || key > live_keys[i - 1], "invalid-config",
                        "live keys must be strictly ascending");
        const double logit = (salience[key] + noise_at(query_base, key)) * scale;
        row.probs[i] = logit;
        if (logit > max_logit) {
            max_logit = logit;
        }
    }

    double denom = 0.0;
    for (double& p : row.probs) {
        p = std::exp(p - max_logit);
        denom += p;
    }
    for (double& p : row.probs) {
        p /= denom;
    }
    return row;
}

AttentionRow GeneratedTrace::decode_row(std::size_t layer, std::size_t step) const {
    const std::size_t query = m_config.context_length() + step;
    std::vector<std::size_t> all(query);
    for (std::size_t k = 0; k < query; ++k) {
        all[k] = k;
    }
    return decode_row(layer, step, all);
}

AttentionMatrix GeneratedTrace::full_matrix(std::size_t layer) const {
    AttentionMatrix m = prefill(layer);
    m.col_modality = m_modalities;
    m.row_modality = m_modalities;
    m.row_modality.resize(m_config.context_length() + m_config.decode_steps);
    for (std::size_t s = 0; s < m_config.decode_steps; ++s) {
        m.rows.push_back(decode_row(layer, s));
    }
    return m;
}

GeneratedTrace generate_trace(const StreamConfig& cfg) {
    cfg.validate();

    const std::size_t n_ctx = cfg.context_length();
    const std::size_t total = cfg.total_tokens();

    std::vector<TokenModality> modalities(total);
    for (std::size_t j = 0; j < total; ++j) {
        if (j < cfg.n_visual) {
            modalities[j] = TokenModality::Visual;
        } else if (j < n_ctx) {
            modalities[j] = TokenModality::Text;
        } else {
            modalities[j] = TokenModality::Generated;
        }
    }

    auto layer_salience_seed = [&](std::size_t layer) {
        return rng::hash_combine(rng::hash_combine(cfg.seed, kSalienceTag),
                                 static_cast<std::uint64_t>(layer));
    };
    auto dist_for = [&](std::size_t token) -> const SalienceDist& {
        // Generated tokens are language tokens, so they share the text law.
        return modalities[token] == TokenModality::Visual ? cfg.visual_salience
                                                          : cfg.text_salience;
    };

    // Layer-1 salience first: it is the anchor every other layer blends with.
    std::vector<std::vector<double>> salience(cfg.n_layers);
    {
        rng::Stream base_stream(layer_salience_seed(0));
        salience[0].resize(total);
        for (std::size_t j = 0; j < total; ++j) {
            salience[0][j] = draw_salience(dist_for(j), base_stream);
        }
    }

    std::vector<AttentionMatrix> prefill(cfg.n_layers);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
    const std::int64_t n_layers = static_cast<std::int64_t>(cfg.n_layers);

    // Layers are independent given the layer-1 anchor: each has its own
    // derived salience stream and its noise is counter-based, so this loop
    // parallelizes without any cross-thread accumulation.
#pragma omp parallel for schedule(static)
    for (std::int64_t layer_index = 0; layer_index < n_layers; ++layer_index) {
        const std::size_t layer = static_cast<std::size_t>(layer_index);
        if (layer > 0) {
            rng::Stream fresh(layer_salience_seed(layer));
            salience[layer].resize(total);
            for (std::size_t j = 0; j < total; ++j) {
                const double fresh_draw = draw_salience(dist_for(j), fresh);
                salience[layer][j] = cfg.rho * salience[0][j] + (1.0 - cfg.rho) * fresh_draw;
            }
        }

        AttentionMatrix& m = prefill[layer];
        m.col_modality.assign(modalities.begin(), modalities.begin() + static_cast<std::ptrdiff_t>(n_ctx));
        m.row_modality = m.col_modality;
        m.rows.resize(n_ctx);
        for (std::size_t t = 0; t < n_ctx; ++t) {
            const std::uint64_t query_base = noise_base(cfg.seed, t);
            AttentionRow& row = m.rows[t];
            row.step = t;
            row.probs.resize(t + 1);
            double max_logit = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j <= t; ++j) {
                const double logit = (salience[layer][j] + noise_at(query_base, j)) * scale;
                row.probs[j] = logit;
                if (logit > max_logit) {
                    max_logit = logit;
                }
            }
            double denom = 0.0;
            for (double& p : row.probs) {
                p = std::exp(p - max_logit);
                denom += p;
            }
            for (double& p : row.probs) {
                p /= denom;
            }
        }
    }

    return GeneratedTrace(cfg, std::move(modalities), std::move(prefill), std::move(salience));
}

std::string_view to_string(Policy p) {
    switch (p) {
    case Policy::Full:
        return "full";
    case Policy::Hae:
        return "hae";
    case Policy::Greedy:
        return "greedy";
    case Policy::Window:
        return "window";
    }
    return "full";
}

Policy policy_from_string(std::string_view name) {
    if (name == "full") {
        return Policy::Full;
    }
    if (name == "hae") {
        return Policy::Hae;
    }
    if (name == "greedy") {
        return Policy::Greedy;
    }
    if (name == "window") {
        return Policy::Window;
    }
    KVEVICT_REQUIRE(false, "config-mismatch", "unknown policy \"" + std::string(name) + "\"");
}

std::optional<double> overlap_mean(const MetricsRecord& record) {
    if (record.overlap_rates.empty()) {
        return std::nullopt;
    }
    double sum = 0.0;
    for (double r : record.overlap_rates) {
        sum += r;
    }
    return sum / static_cast<double>(record.overlap_rates.size());
}

namespace {

// Decode-loop flavor after the prefill decision: no eviction, recycle-bin, or
// one-per-step greedy.
enum class DecodeMode { None, Bin, Greedy };

struct LayerOutcome {
    std::size_t retained = 0;
    std::size_t evicted = 0;
    double loss = 0.0;
};

LayerOutcome run_layer(const GeneratedTrace& trace, std::size_t layer, DecodeMode mode,
                       const std::vector<std::size_t>& prefill_evicted, const PolicyConfig& cfg,
                       std::size_t budget, std::size_t recent_window) {
    const StreamConfig& stream = trace.config();
    const std::size_t n_ctx = stream.context_length();
    const std::vector<TokenModality>& modalities = trace.modalities();

    // Cumulative attention received during prefill seeds each survivor's
    // score, so decode-time ranking sees the full history.
    const std::vector<double> prefill_scores = cumulative_scores(trace.prefill(layer));

    LayerOutcome outcome;

    std::vector<bool> evicted_at_prefill(n_ctx, false);
    for (std::size_t j : prefill_evicted) {
        evicted_at_prefill[j] = true;
        outcome.loss += prefill_scores[j];
    }
    outcome.evicted += prefill_evicted.size();

    std::vector<KVEntry> initial;
    std::vector<std::size_t> live;
    initial.reserve(n_ctx - prefill_evicted.size());
    live.reserve(n_ctx - prefill_evicted.size() + stream.decode_steps);
    for (std::size_t j = 0; j < n_ctx; ++j) {
        if (evicted_at_prefill[j]) {
            continue;
        }
        KVEntry entry;
        entry.original_index = j;
        entry.modality = modalities[j];
        entry.beta = prefill_scores[j];
        entry.birth_step = -1;
        initial.push_back(entry);
        live.push_back(j);
    }

    CacheState state;
    if (mode == DecodeMode::Bin) {
        state = CacheState(*cfg.ddes, std::move(initial));
    } else {
        state.entries = std::move(initial);
        state.prefill_size = state.entries.size();
    }

    for (std::size_t s = 0; s < stream.decode_steps; ++s) {
        const std::size_t query = n_ctx + s;
        const AttentionRow row = trace.decode_row(layer, s, live);

        KVEntry fresh;
        fresh.original_index = query;
        fresh.modality = modalities[query];
        fresh.beta = 0.0;

        StepEvent event;
        switch (mode) {
        case DecodeMode::None: {
            update_scores(state, row);
            fresh.birth_step = state.step;
            state.entries.push_back(fresh);
            ++state.step;
            event.step = static_cast<std::int64_t>(s);
            event.cache_size = state.entries.size();
            live.push_back(query);
            break;
        }
        case DecodeMode::Bin: {
            event = step_decode(state, row, fresh);
            live.push_back(query);
            break;
        }
        case DecodeMode::Greedy: {
            event = greedy_evict_step(state, row, fresh, budget, recent_window);
            live.push_back(query);
            break;
        }
        }

        if (!event.flushed.empty()) {
            // Mirror the evictions into the live-key view, preserving order.
            std::size_t write = 0;
            for (std::size_t read = 0; read < live.size(); ++read) {
                bool gone = false;
                for (std::size_t f : event.flushed) {
                    if (live[read] == f) {
                        gone = true;
                        break;
                    }
                }
                if (!gone) {
                    live[write++] = live[read];
                }
            }
            live.resize(write);
        }

        if (cfg.event_log != nullptr) {
            (*cfg.event_log) << event_to_json_line(event) << '\n';
        }
    }

    outcome.retained = state.entries.size();
    outcome.evicted += state.evictions.size();
    outcome.loss += eviction_loss(state.evictions);
    return outcome;
}

}  // namespace

MetricsRecord run_policy(const GeneratedTrace& trace, Policy policy, const PolicyConfig& cfg) {
    const StreamConfig& stream = trace.config();

    DecodeMode mode = DecodeMode::None;
    std::size_t budget = 0;
    std::size_t recent_window = 0;
    PruneDecision decision;

    switch (policy) {
    case Policy::Full:
        break;
    case Policy::Hae:
        cfg.dap.validate(stream.n_visual);
        if (cfg.ddes.has_value()) {
            cfg.ddes->validate();
            mode = DecodeMode::Bin;
        }
        break;
    case Policy::Greedy:
        KVEVICT_REQUIRE(cfg.greedy.budget >= 1, "config-mismatch",
                        "greedy policy needs a budget >= 1");
        KVEVICT_REQUIRE(cfg.greedy.recent_window <= cfg.greedy.budget, "config-mismatch",
                        "recent_window must not exceed the budget");
        mode = DecodeMode::Greedy;
        budget = cfg.greedy.budget;
        recent_window = cfg.greedy.recent_window;
        break;
    case Policy::Window:
        KVEVICT_REQUIRE(cfg.greedy.budget >= 1, "config-mismatch",
                        "window policy needs a budget >= 1");
        mode = DecodeMode::Greedy;
        budget = cfg.greedy.budget;
        recent_window = budget;  // protect everything except the oldest
        break;
    }

    const auto start = std::chrono::steady_clock::now();

    if (policy == Policy::Hae) {
        decision = prune_prefill(trace.prefill(0), cfg.dap);
    }

    MetricsRecord record;
    record.policy = std::string(to_string(policy));
    record.seed = trace.seed();

    for (std::size_t layer = 0; layer < trace.layer_count(); ++layer) {
        const LayerOutcome outcome =
            run_layer(trace, layer, mode, decision.evicted, cfg, budget, recent_window);
        record.retained_entries += outcome.retained;
        record.evicted_entries += outcome.evicted;
        record.eviction_loss += outcome.loss;
    }

    // Cross-layer agreement analysis; never part of the decision path.
    if (policy == Policy::Hae && !decision.evicted.empty()) {
        std::vector<std::vector<std::size_t>> evictable;
        evictable.reserve(trace.layer_count());
        for (std::size_t layer = 0; layer < trace.layer_count(); ++layer) {
            evictable.push_back(prune_prefill(trace.prefill(layer), cfg.dap).evicted);
        }
        record.overlap_rates = overlap_rate(decision.evicted, evictable);
    }

    const auto end = std::chrono::steady_clock::now();
    record.cache_bytes = record.retained_entries * cfg.bytes_per_entry;
    record.wall_ms =
        std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(end - start).count();
    return record;
}

}  // namespace kvevict
