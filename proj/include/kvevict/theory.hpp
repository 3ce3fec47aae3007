// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "kvevict/attention.hpp"

namespace kvevict {

// Exponential-decay model of an evicted token's residual attention: a token
// whose score starts at s1 is worth s1 * (1-lambda)^t after t further steps.
// These functions are the executable form of the engine's loss guarantees and
// serve as independent oracles in the test suite.
struct DecayModelParams {
    double lambda = 0.5;    // decay rate, in (0, 1)
    double attn_max = 1.0;  // largest initial score among evicted tokens, > 0
    double epsilon = 0.01;  // tolerated per-token loss, > 0
    std::optional<std::vector<double>> s1;  // optional per-token initial scores

    // Throws "invalid-decay" on lambda outside (0,1) and contract errors on
    // non-positive attn_max / epsilon. epsilon > attn_max is legal but makes
    // the delay bound vacuous (see eviction_threshold).
    void validate() const;
};

// s1 * (1-lambda)^t. Throws "invalid-decay" when lambda is outside (0,1).
double decayed_score(double s1, double lambda, std::size_t t);

// The delay bound Q = log(epsilon/attn_max) / log(1-lambda), natural logs.
// Q >= 0 iff epsilon <= attn_max; a negative Q means every delay satisfies
// the loss target and the bound is vacuous.
double eviction_threshold(const DecayModelParams& p);

// True iff Q from eviction_threshold is negative ("vacuous-bound": the loss
// target exceeds the largest possible score, so it holds trivially).
bool vacuous_bound(const DecayModelParams& p);

// True iff attn_max * (1-lambda)^t_evict <= epsilon. Monotone in t_evict, and
// by construction true exactly when t_evict >= ceil(Q).
bool single_token_loss_bound_holds(const DecayModelParams& p, std::size_t t_evict);

// Closed form of the worst-case total loss over k consecutive evictions:
// attn_max * (1-lambda) * (1 - (1-lambda)^k) / lambda. Agrees with the
// explicit sum of attn_max * (1-lambda)^t for t = 1..k within 1e-12.
double geometric_total_loss(const DecayModelParams& p, std::size_t k);

// True iff observed_loss <= the sum of the d smallest final scores. For a
// stepwise greedy eviction of d entries from a fixed score vector the two
// sides are exactly equal; dynamic policies must stay at or below.
// Throws "insufficient-entries" when d exceeds the score count.
bool corollary_bound(const std::vector<double>& final_scores, std::size_t d,
                     double observed_loss);

// Sum of the d smallest final scores, the right-hand side of corollary_bound,
// exposed so callers can report the margin.
double lowest_d_sum(const std::vector<double>& final_scores, std::size_t d);

// Estimator for attn_max from data: over the evicted visual columns, the
// minimum of each column's maximum text attention. Throws "undefined" when
// evicted is empty.
double attn_max_estimate(const AttentionMatrix& m, const std::vector<std::size_t>& evicted);

// One Monte-Carlo check of the delay bound: random decay-model parameters
// (epsilon kept <= attn_max so Q is meaningful), eviction delay drawn at or
// above ceil(Q), and the resulting single-token loss compared against epsilon.
struct TheoryInstance {
    std::uint64_t seed = 0;
    double lambda = 0.0;
    double epsilon = 0.0;
    double q = 0.0;
    std::size_t delay = 0;
    double loss = 0.0;
    bool bound_holds = false;
};

// Runs `instances` independent seeded checks (parallel across instances; each
// instance's numbers depend only on its derived seed, so results are
// deterministic at any thread count). Returns them in instance order.
std::vector<TheoryInstance> run_theory_monte_carlo(std::size_t instances, std::uint64_t seed);

}  // namespace kvevict
