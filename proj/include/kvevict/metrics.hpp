// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "kvevict/attention.hpp"

namespace kvevict {

// Probabilities at or below this count as negligible for sparsity purposes.
inline constexpr double kDefaultSparsityThreshold = 1e-4;

// Per-modality sparsity rates. A component is empty when the matrix has no
// column of that modality (absent, deliberately not 0).
struct ModalitySparsity {
    double overall = 0.0;
    std::optional<double> visual;
    std::optional<double> text;
};

struct ModalityVariance {
    std::optional<double> visual;
    std::optional<double> text;
};

// Fraction of present cells with value <= threshold. Throws "empty-matrix"
// on a matrix with no rows.
double sparsity_rate(const AttentionMatrix& m, double threshold = kDefaultSparsityThreshold);

// Sparsity split by key-column modality; `overall` covers every present cell.
ModalitySparsity modality_sparsity(const AttentionMatrix& m,
                                   double threshold = kDefaultSparsityThreshold);

// Column sums; cells a row does not reach count 0. Result length equals the
// column count.
std::vector<double> cumulative_scores(const AttentionMatrix& m);

// Population variance of `scores` restricted to Visual and to Text positions.
// A modality with no positions yields an empty component.
ModalityVariance modality_variance(const std::vector<double>& scores,
                                   const std::vector<TokenModality>& modalities);

namespace serial {

// Single-threaded reference kernels with identical contracts to the parallel
// versions above. These are the comparison baseline for tests and for the
// kernel benchmark; results are bit-identical to the parallel path.
double sparsity_rate(const AttentionMatrix& m, double threshold = kDefaultSparsityThreshold);
ModalitySparsity modality_sparsity(const AttentionMatrix& m,
                                   double threshold = kDefaultSparsityThreshold);
std::vector<double> cumulative_scores(const AttentionMatrix& m);

}  // namespace serial
}  // namespace kvevict
