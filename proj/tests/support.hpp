// Copyright (C) 2026 the kvevict authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kvevict/attention.hpp"
#include "kvevict/check.hpp"
#include "kvevict/rng.hpp"

namespace support {

// Runs f, expecting a contract_error; returns the stable token prefix of its
// message ("" when nothing was thrown, "<other>" on a different exception).
inline std::string thrown_token(const std::function<void()>& f) {
    try {
        f();
    } catch (const kvevict::contract_error& e) {
        const std::string msg = e.what();
        return msg.substr(0, msg.find(':'));
    } catch (...) {
        return "<other>";
    }
    return "";
}

inline kvevict::AttentionRow make_row(std::size_t step, std::vector<double> probs) {
    kvevict::AttentionRow row;
    row.step = step;
    row.probs = std::move(probs);
    return row;
}

// Rectangular matrix from explicit row values. Column modalities given; row
// modalities default to Text for every row (the common analysis setting).
inline kvevict::AttentionMatrix make_matrix(const std::vector<std::vector<double>>& rows,
                                            std::vector<kvevict::TokenModality> cols,
                                            std::vector<kvevict::TokenModality> row_mods = {}) {
    kvevict::AttentionMatrix m;
    m.col_modality = std::move(cols);
    if (row_mods.empty()) {
        m.row_modality.assign(rows.size(), kvevict::TokenModality::Text);
    } else {
        m.row_modality = std::move(row_mods);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.rows.push_back(make_row(i, rows[i]));
    }
    return m;
}

inline std::vector<kvevict::TokenModality> modality_layout(std::size_t n_visual,
                                                           std::size_t n_text) {
    std::vector<kvevict::TokenModality> out(n_visual, kvevict::TokenModality::Visual);
    out.insert(out.end(), n_text, kvevict::TokenModality::Text);
    return out;
}

// Uniform(0,1)-filled rectangular matrix with the given column layout; every
// row is a Text query row.
inline kvevict::AttentionMatrix random_matrix(std::size_t n_rows, std::size_t n_visual,
                                              std::size_t n_text, std::uint64_t seed) {
    kvevict::rng::Stream stream(seed);
    std::vector<std::vector<double>> rows(n_rows);
    for (auto& row : rows) {
        row.resize(n_visual + n_text);
        for (double& v : row) {
            v = stream.next_canonical();
        }
    }
    return make_matrix(rows, modality_layout(n_visual, n_text));
}

// Causal (ragged) variant: row t covers columns 0..t.
inline kvevict::AttentionMatrix random_causal_matrix(std::size_t n_visual, std::size_t n_text,
                                                     std::uint64_t seed) {
    const std::size_t n = n_visual + n_text;
    kvevict::rng::Stream stream(seed);
    kvevict::AttentionMatrix m;
    m.col_modality = modality_layout(n_visual, n_text);
    m.row_modality = m.col_modality;
    for (std::size_t t = 0; t < n; ++t) {
        kvevict::AttentionRow row;
        row.step = t;
        row.probs.resize(t + 1);
        for (double& v : row.probs) {
            v = stream.next_canonical();
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

}  // namespace support
