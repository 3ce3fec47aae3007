// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#include "kvevict/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kvevict/check.hpp"
#include "kvevict/rng.hpp"

namespace kvevict {

namespace {

void check_lambda(double lambda) {
    KVEVICT_REQUIRE(lambda > 0.0 && lambda < 1.0, "invalid-decay",
                    "decay rate must lie strictly inside (0, 1)");
}

}  // namespace

void DecayModelParams::validate() const {
    check_lambda(lambda);
    KVEVICT_REQUIRE(attn_max > 0.0 && std::isfinite(attn_max), "invalid-config",
                    "attn_max must be > 0");
    KVEVICT_REQUIRE(epsilon > 0.0 && std::isfinite(epsilon), "invalid-config",
                    "epsilon must be > 0");
}

double decayed_score(double s1, double lambda, std::size_t t) {
    check_lambda(lambda);
    return s1 * std::pow(1.0 - lambda, static_cast<double>(t));
}

double eviction_threshold(const DecayModelParams& p) {
    p.validate();
    return std::log(p.epsilon / p.attn_max) / std::log(1.0 - p.lambda);
}

bool vacuous_bound(const DecayModelParams& p) {
    // Q < 0 exactly when epsilon > attn_max: any delay satisfies the target.
    return eviction_threshold(p) < 0.0;
}

bool single_token_loss_bound_holds(const DecayModelParams& p, std::size_t t_evict) {
    p.validate();
    return decayed_score(p.attn_max, p.lambda, t_evict) <= p.epsilon;
}

double geometric_total_loss(const DecayModelParams& p, std::size_t k) {
    p.validate();
    KVEVICT_REQUIRE(k >= 1, "invalid-config", "k must be >= 1");
    const double q = 1.0 - p.lambda;
    return p.attn_max * q * (1.0 - std::pow(q, static_cast<double>(k))) / p.lambda;
}

double lowest_d_sum(const std::vector<double>& final_scores, std::size_t d) {
    KVEVICT_REQUIRE(d <= final_scores.size(), "insufficient-entries",
                    "d=" + std::to_string(d) + " exceeds the " +
                        std::to_string(final_scores.size()) + " available scores");
    std::vector<double> sorted = final_scores;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        sum += sorted[i];
    }
    return sum;
}

bool corollary_bound(const std::vector<double>& final_scores, std::size_t d,
                     double observed_loss) {
    return observed_loss <= lowest_d_sum(final_scores, d);
}

double attn_max_estimate(const AttentionMatrix& m, const std::vector<std::size_t>& evicted) {
    KVEVICT_REQUIRE(!evicted.empty(), "undefined",
                    "attn_max is undefined for an empty evicted set");
    double result = 0.0;
    bool first = true;
    for (std::size_t col : evicted) {
        KVEVICT_REQUIRE(col < m.column_count(), "format-error",
                        "evicted column " + std::to_string(col) + " out of range");
        double col_max = 0.0;
        for (std::size_t i = 0; i < m.rows.size(); ++i) {
            if (m.row_modality[i] != TokenModality::Text) {
                continue;
            }
            if (col < m.rows[i].probs.size()) {
                col_max = std::max(col_max, m.rows[i].probs[col]);
            }
        }
        if (first || col_max < result) {
            result = col_max;
            first = false;
        }
    }
    return result;
}

std::vector<TheoryInstance> run_theory_monte_carlo(std::size_t instances, std::uint64_t seed) {
    std::vector<TheoryInstance> results(instances);
    const std::int64_t n = static_cast<std::int64_t>(instances);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::uint64_t instance_seed =
            rng::hash_combine(seed, static_cast<std::uint64_t>(i));
        rng::Stream stream(instance_seed);

        DecayModelParams p;
        p.lambda = stream.next_uniform(0.02, 0.98);
        p.attn_max = stream.next_uniform(0.05, 8.0);
        // Keep epsilon at or below attn_max so the delay bound is meaningful.
        p.epsilon = p.attn_max * stream.next_canonical();

        const double q = eviction_threshold(p);
        const std::size_t extra = static_cast<std::size_t>(stream.next_u64() % 8);
        const std::size_t delay = static_cast<std::size_t>(std::ceil(q)) + extra;

        TheoryInstance& out = results[static_cast<std::size_t>(i)];
        out.seed = instance_seed;
        out.lambda = p.lambda;
        out.epsilon = p.epsilon;
        out.q = q;
        out.delay = delay;
        out.loss = decayed_score(p.attn_max, p.lambda, delay);
        out.bound_holds = out.loss <= p.epsilon;
    }
    return results;
}

}  // namespace kvevict
